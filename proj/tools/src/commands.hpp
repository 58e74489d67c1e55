#pragma once

#include <iosfwd>

#include "config.hpp"

namespace kmesn::cli {

int cmd_cluster_scan(const ExperimentConfig& cfg, std::ostream& out);
int cmd_optimize(const ExperimentConfig& cfg, std::ostream& out);
int cmd_train(const ExperimentConfig& cfg, std::ostream& out);
int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out);
int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_describe(const ExperimentConfig& cfg, std::ostream& out);

}  // namespace kmesn::cli
