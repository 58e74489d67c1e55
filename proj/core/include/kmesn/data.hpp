#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "kmesn/linalg.hpp"

namespace kmesn {

enum class TaskKind { frame_level, sequence_level };

std::string_view to_string(TaskKind t) noexcept;
/// Accepts "frame"/"frame_level" and "sequence"/"sequence_level".
TaskKind parse_task_kind(std::string_view name);

/// One labelled multivariate sequence. `labels` holds one entry per frame
/// for frame-level tasks and exactly one entry for sequence-level tasks.
struct Sequence {
  std::int64_t id = 0;
  DenseMatrix features;  ///< T x N_in
  std::vector<std::size_t> labels;

  std::size_t length() const noexcept { return features.rows(); }
  friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct SequenceDataset {
  std::vector<Sequence> sequences;
  std::size_t n_classes = 0;
  TaskKind task = TaskKind::frame_level;

  std::size_t input_dim() const noexcept {
    return sequences.empty() ? 0 : sequences.front().features.cols();
  }
  std::size_t frame_count() const noexcept;
  bool empty() const noexcept { return sequences.empty(); }

  /// Checks the dataset invariants: uniform N_in, label shape matching the
  /// task kind, labels < n_classes. Throws DimensionError or LabelError.
  void validate() const;

  /// Sequences at `indices`, in that order.
  SequenceDataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const SequenceDataset&, const SequenceDataset&) = default;
};

/// Reads the canonical `seq,t,f0,...,f{N-1},label` CSV. Sequences appear in
/// order of first occurrence; frames are ordered by t, which must run
/// 0..T-1 without gaps. The task kind is inferred (frame_level when any
/// sequence has varying labels) unless `task` overrides it.
/// Throws ParseError (with line number) or EmptyDataset.
SequenceDataset read_csv(std::istream& in, std::optional<TaskKind> task = std::nullopt);
SequenceDataset load_csv(const std::filesystem::path& path,
                         std::optional<TaskKind> task = std::nullopt);

/// Writes the canonical CSV with shortest round-trip number formatting.
void write_csv(std::ostream& out, const SequenceDataset& ds);
void save_csv(const std::filesystem::path& path, const SequenceDataset& ds);

/// All frames of all sequences stacked into one N_frames x N_in matrix.
DenseMatrix pooled_frames(const SequenceDataset& ds);

/// Zero-mean / unit-variance feature scaling fitted on training frames.
/// A zero scale marks a constant feature; it is applied as scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
};

Standardizer fit_standardizer(const SequenceDataset& train);
SequenceDataset apply_standardizer(const Standardizer& s, const SequenceDataset& ds);

/// Per-feature [min, max] bounds fitted on training frames.
struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;
};

MinMaxScaler fit_minmax(const SequenceDataset& train);
/// x -> (x - min) / (max - min); features with max == min map to 0.
SequenceDataset minmax_rescale(const SequenceDataset& ds, const MinMaxScaler& bounds);

/// One T x n_outputs target matrix per sequence. Frame-level rows carry a 1
/// at the frame label; sequence-level rows all carry a 1 at the sequence
/// label. `n_outputs` defaults to ds.n_classes. LabelError for labels out of
/// range.
std::vector<DenseMatrix> one_hot_targets(const SequenceDataset& ds,
                                         std::optional<std::size_t> n_outputs = std::nullopt);

/// Row-wise argmax, ties to the lowest index.
std::vector<std::size_t> frame_decisions(const DenseMatrix& y);

/// Argmax of the column sums of Y (readouts accumulated over time).
/// DegenerateInput for T == 0.
std::size_t sequence_decision(const DenseMatrix& y);

/// Mean squared difference over all entries. DimensionError on shape mismatch.
double mse(const DenseMatrix& y, const DenseMatrix& d);

/// Fraction of frames whose predicted label differs from the truth.
double fer(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);
/// Fraction of misclassified sequences.
double cer(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// counts[true][predicted]; labels >= n_classes raise LabelError.
std::vector<std::vector<std::uint64_t>> confusion_matrix(std::span<const std::size_t> predicted,
                                                         std::span<const std::size_t> truth,
                                                         std::size_t n_classes);

struct DatasetStats {
  std::size_t input_dim = 0;
  std::size_t sequences = 0;
  std::size_t outputs = 0;
  double t_mean = 0.0;
  std::size_t t_min = 0;
  std::size_t t_max = 0;
  std::size_t samples = 0;
  TaskKind task = TaskKind::frame_level;
};

/// Exact statistics. DegenerateInput for an empty dataset.
DatasetStats describe(const SequenceDataset& ds);

}  // namespace kmesn
