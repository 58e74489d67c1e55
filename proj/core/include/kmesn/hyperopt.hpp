#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "kmesn/data.hpp"
#include "kmesn/reservoir.hpp"
#include "kmesn/rng.hpp"

namespace kmesn {

/// The five searchable scalings of HyperParams.
enum class Param { input_scaling, spectral_radius, leakage, bias_scaling, regularization };

inline constexpr std::array<Param, 5> kSearchParams = {
    Param::input_scaling, Param::spectral_radius, Param::leakage, Param::bias_scaling,
    Param::regularization};

std::string_view to_string(Param p) noexcept;
Param parse_param(std::string_view name);
double get_param(const HyperParams& hp, Param p) noexcept;
void set_param(HyperParams& hp, Param p, double value) noexcept;

struct ParamDistribution {
  enum class Kind { uniform, loguniform, grid };

  Kind kind = Kind::uniform;
  double low = 0.0;
  double high = 1.0;
  std::size_t steps = 1;  ///< grid only

  static ParamDistribution uniform(double low, double high) { return {Kind::uniform, low, high, 1}; }
  static ParamDistribution loguniform(double low, double high) {
    return {Kind::loguniform, low, high, 1};
  }
  static ParamDistribution grid(double low, double high, std::size_t steps) {
    return {Kind::grid, low, high, steps};
  }

  /// low <= high, loguniform needs low > 0, grids need steps >= 1 (a single
  /// step requires low == high). low == high is accepted as a degenerate
  /// point distribution. Throws ConfigError.
  void validate() const;
  double sample(Rng& rng) const;
  /// Evenly spaced points low..high (grid kind).
  std::vector<double> grid_points() const;
  bool contains(double v) const noexcept;
};

std::string_view to_string(ParamDistribution::Kind k) noexcept;
ParamDistribution::Kind parse_distribution_kind(std::string_view name);

struct ParamSpec {
  Param param;
  ParamDistribution dist;
};

/// One stage of the staged search. A stage made only of grid parameters
/// enumerates their Cartesian product; otherwise `iterations` random draws
/// are taken (grid parameters then draw uniformly among their points).
struct SearchStage {
  std::vector<ParamSpec> params;
  std::size_t iterations = 1;

  bool is_grid() const noexcept;
  /// Number of candidates this stage evaluates.
  std::size_t candidate_count() const noexcept;
};

struct CvPlan {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Shuffled sequence-level k-fold split. Validation sets form a disjoint
/// cover of [0, n) whose sizes differ by at most one; each training set is
/// the complement of its validation set. ConfigError when n < folds or
/// folds < 2.
std::vector<Fold> kfold_split(std::size_t n_sequences, const CvPlan& plan);

/// How validation errors are pooled inside one fold.
enum class MsePooling {
  frames,     ///< mean over all validation frames and outputs
  sequences,  ///< mean of per-sequence MSEs
};

struct CvScore {
  std::vector<double> fold_mse;
  double mean_mse = 0.0;
};

/// Cross-validated scoring of candidate scalings on a fixed WeightSet.
/// Immutable after construction; evaluate() may run concurrently.
class CandidateEvaluator {
 public:
  CandidateEvaluator(SequenceDataset data, WeightSet weights, std::vector<Fold> folds,
                     MsePooling pooling = MsePooling::frames);

  /// Trains one readout per fold on the training sequences and returns the
  /// validation MSE against one-hot targets. Candidates whose states are
  /// not finite score +inf. SingularSystem propagates (only possible when
  /// regularization is 0).
  CvScore evaluate(const HyperParams& hp) const;

  /// Scores several regularization values for otherwise identical
  /// hyper-parameters, reusing one pass of state collection.
  std::vector<CvScore> evaluate_regularization(const HyperParams& hp,
                                               std::span<const double> regularization) const;

  const SequenceDataset& data() const noexcept { return data_; }
  const WeightSet& weights() const noexcept { return weights_; }
  const std::vector<Fold>& folds() const noexcept { return folds_; }
  std::size_t outputs() const noexcept { return data_.n_classes; }

 private:
  SequenceDataset data_;
  WeightSet weights_;
  std::vector<Fold> folds_;
  MsePooling pooling_;
  std::vector<DenseMatrix> targets_;
  // groups of sequences sharing the same fold-membership pattern
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::vector<std::size_t>> fold_groups_;  // per fold: groups in its training set
};

/// Mean validation MSE of `hp` (thin wrapper over CandidateEvaluator).
double evaluate_candidate(const HyperParams& hp, const WeightSet& weights,
                          const SequenceDataset& data, const std::vector<Fold>& folds);

struct Candidate {
  HyperParams params;
  std::vector<double> fold_mse;
  double mean_mse = std::numeric_limits<double>::infinity();
  std::size_t stage = 0;
};

struct SearchTrace {
  std::vector<Candidate> candidates;
  std::size_t best = 0;  ///< lowest mean MSE, earliest on ties

  const Candidate& best_candidate() const { return candidates.at(best); }
};

struct SearchOptions {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Staged random search. Stage s draws its candidates with the parameters
/// of earlier stages frozen at the best values found so far; parameters
/// not yet searched hold their `defaults`.
SearchTrace sequential_search(const std::vector<SearchStage>& stages, const HyperParams& defaults,
                              const CandidateEvaluator& evaluator, const SearchOptions& opts);

/// `n` independent draws over the whole space.
SearchTrace joint_random_search(const std::vector<ParamSpec>& space, std::size_t n,
                                const HyperParams& defaults, const CandidateEvaluator& evaluator,
                                const SearchOptions& opts);

/// Staged search space: (input scaling U[1e-3,1], spectral radius U[0,2]) x200,
/// leakage logU[1e-5,1] x50, bias scaling 21-point grid on [0, bias_upper],
/// regularization logU[1e-5,10] x50. With bias_upper = 1 the grid has 11
/// points (step 0.1).
std::vector<SearchStage> default_sequential_stages(double bias_upper = 2.0,
                                                   double input_scaling_low = 1e-3);

/// Joint search space with the same bounds, bias scaling uniform on [0, 2].
std::vector<ParamSpec> default_joint_space(double input_scaling_low = 1e-3);

/// Starting point of a staged search: memoryless reservoir (rho = 0), no
/// bias, leakage 1 for frame-level and 0.1 for sequence-level tasks.
HyperParams search_defaults(HyperParams structure, TaskKind task);

}  // namespace kmesn
