#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kmesn/clustering.hpp"
#include "kmesn/hyperopt.hpp"
#include "kmesn/reservoir.hpp"

namespace kmesn {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

// JSON documents are pretty-printed with sorted keys. Parsers throw
// ParseError on malformed input and DimensionError on inconsistent shapes.

std::string weights_to_json(const WeightSet& w);
WeightSet weights_from_json(std::string_view text);

std::string readout_to_json(const Readout& r);
Readout readout_from_json(std::string_view text);

std::string hyperparams_to_json(const HyperParams& hp);
/// Reads a (possibly partial) hyper-parameter object; absent keys keep the
/// values of `base`. The result is validated.
HyperParams hyperparams_from_json(std::string_view text, const HyperParams& base = {});

/// Centroid CSV: header `count,f0,...,f{N-1}`, one row per centroid.
void write_centroids_csv(std::ostream& out, const Centroids& c);
Centroids read_centroids_csv(std::istream& in);

/// Elbow CSV: header `k,sse`.
void write_elbow_csv(std::ostream& out, const std::vector<ElbowPoint>& points);

/// Trace CSV: `index,stage,<five params>,fold0..fold{F-1},mean_mse`.
void write_trace_csv(std::ostream& out, const SearchTrace& trace);
/// Best candidate of a trace as JSON (full hyper-parameters, index, scores).
std::string trace_best_to_json(const SearchTrace& trace);

}  // namespace kmesn
