#include "kmesn/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "kmesn/errors.hpp"

namespace kmesn {

using json = nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad value for '") + key + "': " + e.what());
  }
}

json sparse_to_json(const SparseMatrix& m) {
  json entries = json::array();
  for (const auto& t : m.triplets()) entries.push_back(json::array({t.row, t.col, t.value}));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"entries", std::move(entries)}};
}

SparseMatrix sparse_from_json(const json& j) {
  const auto rows = field<std::size_t>(j, "rows");
  const auto cols = field<std::size_t>(j, "cols");
  std::vector<Triplet> entries;
  for (const auto& e : field<json>(j, "entries")) {
    if (!e.is_array() || e.size() != 3) throw ParseError("sparse entry must be [row, col, value]");
    entries.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<double>()});
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(entries));
}

json dense_to_json(const DenseMatrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"values", std::vector<double>(m.values().begin(), m.values().end())}};
}

DenseMatrix dense_from_json(const json& j) {
  return DenseMatrix(field<std::size_t>(j, "rows"), field<std::size_t>(j, "cols"),
                     field<std::vector<double>>(j, "values"));
}

json hyperparams_json(const HyperParams& hp) {
  return {{"input_scaling", hp.input_scaling},   {"spectral_radius", hp.spectral_radius},
          {"leakage", hp.leakage},               {"bias_scaling", hp.bias_scaling},
          {"regularization", hp.regularization}, {"reservoir_size", hp.reservoir_size},
          {"input_dim", hp.input_dim},           {"output_dim", hp.output_dim},
          {"input_fanin", hp.input_fanin},       {"recurrent_fanin", hp.recurrent_fanin},
          {"activation", std::string(to_string(hp.activation))}};
}

void write_csv_field(std::ostream& out, double v) { out << format_double(v); }

}  // namespace

std::string weights_to_json(const WeightSet& w) {
  json j = {{"input_init", std::string(to_string(w.input_init))},
            {"w_in", sparse_to_json(w.w_in)},
            {"w_res", sparse_to_json(w.w_res)},
            {"w_bias", w.w_bias}};
  return j.dump(2) + "\n";
}

WeightSet weights_from_json(std::string_view text) {
  const json j = parse_json(text);
  WeightSet w;
  w.input_init = parse_input_init(field<std::string>(j, "input_init"));
  w.w_in = sparse_from_json(field<json>(j, "w_in"));
  w.w_res = sparse_from_json(field<json>(j, "w_res"));
  w.w_bias = field<std::vector<double>>(j, "w_bias");
  if (w.w_res.rows() != w.w_res.cols() || w.w_in.rows() != w.w_res.rows() ||
      w.w_bias.size() != w.w_res.rows()) {
    throw DimensionError("weight file has inconsistent shapes");
  }
  return w;
}

std::string readout_to_json(const Readout& r) {
  return json{{"w_out", dense_to_json(r.w_out)}}.dump(2) + "\n";
}

Readout readout_from_json(std::string_view text) {
  const json j = parse_json(text);
  return Readout{dense_from_json(field<json>(j, "w_out"))};
}

std::string hyperparams_to_json(const HyperParams& hp) { return hyperparams_json(hp).dump(2) + "\n"; }

HyperParams hyperparams_from_json(std::string_view text, const HyperParams& base) {
  const json j = parse_json(text);
  if (!j.is_object()) throw ParseError("hyper-parameters must be a JSON object");
  HyperParams hp = base;
  auto real = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = field<double>(j, key);
  };
  auto count = [&](const char* key, std::size_t& dst) {
    if (j.contains(key)) dst = field<std::size_t>(j, key);
  };
  real("input_scaling", hp.input_scaling);
  real("spectral_radius", hp.spectral_radius);
  real("leakage", hp.leakage);
  real("bias_scaling", hp.bias_scaling);
  real("regularization", hp.regularization);
  count("reservoir_size", hp.reservoir_size);
  count("input_dim", hp.input_dim);
  count("output_dim", hp.output_dim);
  count("input_fanin", hp.input_fanin);
  count("recurrent_fanin", hp.recurrent_fanin);
  if (j.contains("activation")) hp.activation = parse_activation(field<std::string>(j, "activation"));
  hp.validate();
  return hp;
}

void write_centroids_csv(std::ostream& out, const Centroids& c) {
  out << "count";
  for (std::size_t j = 0; j < c.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t k = 0; k < c.k(); ++k) {
    out << (k < c.counts.size() ? c.counts[k] : 0);
    for (double v : c.mu.row(k)) {
      out << ',';
      write_csv_field(out, v);
    }
    out << '\n';
  }
}

Centroids read_centroids_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<std::uint64_t> counts;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (width == 0) {
      if (fields.size() < 2 || fields[0] != "count") {
        throw ParseError("centroid header must be 'count,f0,...'", line_no);
      }
      width = fields.size() - 1;
      continue;
    }
    if (fields.size() != width + 1) throw ParseError("wrong number of centroid fields", line_no);
    std::uint64_t count = 0;
    {
      const auto f = fields[0];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), count);
      if (ec != std::errc() || ptr != f.data() + f.size()) throw ParseError("invalid count", line_no);
    }
    counts.push_back(count);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double v = 0.0;
      const auto f = fields[j];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError("invalid centroid value", line_no);
      }
      values.push_back(v);
    }
  }
  if (width == 0) throw ParseError("centroid file has no header");
  if (counts.empty()) throw ParseError("centroid file has no rows");
  return Centroids{DenseMatrix(counts.size(), width, std::move(values)), std::move(counts)};
}

void write_elbow_csv(std::ostream& out, const std::vector<ElbowPoint>& points) {
  out << "k,sse\n";
  for (const auto& p : points) {
    out << p.k << ',';
    write_csv_field(out, p.sse);
    out << '\n';
  }
}

void write_trace_csv(std::ostream& out, const SearchTrace& trace) {
  const std::size_t folds = trace.candidates.empty() ? 0 : trace.candidates.front().fold_mse.size();
  out << "index,stage";
  for (Param p : kSearchParams) out << ',' << to_string(p);
  for (std::size_t f = 0; f < folds; ++f) out << ",fold" << f;
  out << ",mean_mse\n";
  for (std::size_t i = 0; i < trace.candidates.size(); ++i) {
    const auto& c = trace.candidates[i];
    out << i << ',' << c.stage;
    for (Param p : kSearchParams) {
      out << ',';
      write_csv_field(out, get_param(c.params, p));
    }
    for (double m : c.fold_mse) {
      out << ',';
      write_csv_field(out, m);
    }
    out << ',';
    write_csv_field(out, c.mean_mse);
    out << '\n';
  }
}

std::string trace_best_to_json(const SearchTrace& trace) {
  const Candidate& best = trace.best_candidate();
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json fold = json::array();
  for (double m : best.fold_mse) fold.push_back(finite_or_null(m));
  json j = {{"index", trace.best},
            {"stage", best.stage},
            {"evaluations", trace.candidates.size()},
            {"mean_mse", finite_or_null(best.mean_mse)},
            {"fold_mse", std::move(fold)},
            {"hyperparams", hyperparams_json(best.params)}};
  return j.dump(2) + "\n";
}

}  // namespace kmesn
