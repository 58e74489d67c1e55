#include "kmesn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>

#include "kmesn/errors.hpp"

namespace kmesn {

std::string_view to_string(TaskKind t) noexcept {
  return t == TaskKind::frame_level ? "frame_level" : "sequence_level";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "frame" || name == "frame_level") return TaskKind::frame_level;
  if (name == "sequence" || name == "sequence_level") return TaskKind::sequence_level;
  throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

std::size_t SequenceDataset::frame_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.length();
  return n;
}

void SequenceDataset::validate() const {
  const std::size_t dim = input_dim();
  for (const auto& s : sequences) {
    if (s.features.cols() != dim) throw DimensionError("sequences disagree on the feature count");
    const std::size_t expected = task == TaskKind::frame_level ? s.length() : 1;
    if (s.labels.size() != expected) {
      throw LabelError("sequence " + std::to_string(s.id) + " has " +
                       std::to_string(s.labels.size()) + " labels, expected " +
                       std::to_string(expected));
    }
    for (std::size_t l : s.labels) {
      if (l >= n_classes) {
        throw LabelError("label " + std::to_string(l) + " outside [0, " +
                         std::to_string(n_classes) + ")");
      }
    }
  }
}

SequenceDataset SequenceDataset::subset(std::span<const std::size_t> indices) const {
  SequenceDataset out;
  out.n_classes = n_classes;
  out.task = task;
  out.sequences.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= sequences.size()) throw DimensionError("subset index out of range");
    out.sequences.push_back(sequences[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(field) + "'", line);
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ParseError(std::string("non-finite ") + what, line);
  }
  return value;
}

struct PendingFrame {
  std::int64_t t;
  std::size_t line;
  std::size_t label;
  std::vector<double> features;
};

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

SequenceDataset read_csv(std::istream& in, std::optional<TaskKind> task) {
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  if (!next_line()) throw EmptyDataset("dataset file is empty");
  const auto header = split_fields(line);
  if (header.size() < 4 || trim(header[0]) != "seq" || trim(header[1]) != "t" ||
      trim(header.back()) != "label") {
    throw ParseError("header must be 'seq,t,f0,...,label'", line_no);
  }
  const std::size_t n_features = header.size() - 3;

  std::vector<std::int64_t> order;
  std::unordered_map<std::int64_t, std::vector<PendingFrame>> frames;
  std::size_t max_label = 0;
  bool any = false;

  while (next_line()) {
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()),
                       line_no);
    }
    const auto seq = parse_number<std::int64_t>(fields[0], line_no, "sequence id");
    const auto t = parse_number<std::int64_t>(fields[1], line_no, "timestep");
    const auto label = parse_number<std::int64_t>(fields.back(), line_no, "label");
    if (t < 0) throw ParseError("negative timestep", line_no);
    if (label < 0) throw ParseError("negative label", line_no);

    PendingFrame f{t, line_no, static_cast<std::size_t>(label), {}};
    f.features.reserve(n_features);
    for (std::size_t j = 0; j < n_features; ++j)
      f.features.push_back(parse_number<double>(fields[2 + j], line_no, "feature value"));

    auto [it, inserted] = frames.try_emplace(seq);
    if (inserted) order.push_back(seq);
    it->second.push_back(std::move(f));
    max_label = std::max(max_label, static_cast<std::size_t>(label));
    any = true;
  }
  if (!any) throw EmptyDataset("dataset has a header but no frames");

  SequenceDataset ds;
  ds.n_classes = max_label + 1;
  bool labels_vary = false;
  for (std::int64_t id : order) {
    auto& rows = frames[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const PendingFrame& a, const PendingFrame& b) { return a.t < b.t; });
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].t != static_cast<std::int64_t>(i)) {
        throw ParseError("sequence " + std::to_string(id) + ": timestep " +
                         std::to_string(rows[i].t) + " where " + std::to_string(i) +
                         " was expected (timesteps must be contiguous from 0)",
                         rows[i].line);
      }
      if (rows[i].label != rows.front().label) labels_vary = true;
    }
    Sequence s;
    s.id = id;
    std::vector<double> values;
    values.reserve(rows.size() * n_features);
    for (const auto& r : rows) {
      values.insert(values.end(), r.features.begin(), r.features.end());
      s.labels.push_back(r.label);
    }
    s.features = DenseMatrix(rows.size(), n_features, std::move(values));
    ds.sequences.push_back(std::move(s));
  }

  ds.task = task.value_or(labels_vary ? TaskKind::frame_level : TaskKind::sequence_level);
  if (ds.task == TaskKind::sequence_level) {
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
      auto& s = ds.sequences[i];
      const auto& rows = frames[order[i]];
      for (const auto& r : rows) {
        if (r.label != s.labels.front()) {
          throw ParseError("sequence " + std::to_string(s.id) +
                           ": label changes inside a sequence-level task",
                           r.line);
        }
      }
      s.labels.resize(1);
    }
  }
  return ds;
}

SequenceDataset load_csv(const std::filesystem::path& path, std::optional<TaskKind> task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset '" + path.string() + "'");
  return read_csv(in, task);
}

void write_csv(std::ostream& out, const SequenceDataset& ds) {
  std::string buf = "seq,t";
  for (std::size_t j = 0; j < ds.input_dim(); ++j) buf += ",f" + std::to_string(j);
  buf += ",label\n";
  for (const auto& s : ds.sequences) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      buf += std::to_string(s.id);
      buf += ',';
      buf += std::to_string(t);
      for (double v : s.features.row(t)) {
        buf += ',';
        append_number(buf, v);
      }
      buf += ',';
      buf += std::to_string(ds.task == TaskKind::frame_level ? s.labels[t] : s.labels.front());
      buf += '\n';
    }
    out << buf;
    buf.clear();
  }
  out << buf;
}

void save_csv(const std::filesystem::path& path, const SequenceDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  write_csv(out, ds);
}

DenseMatrix pooled_frames(const SequenceDataset& ds) {
  DenseMatrix out(ds.frame_count(), ds.input_dim());
  std::size_t r = 0;
  for (const auto& s : ds.sequences)
    for (std::size_t t = 0; t < s.length(); ++t, ++r) {
      const auto src = s.features.row(t);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessing

namespace {

template <typename F>
SequenceDataset map_features(const SequenceDataset& ds, std::size_t dim, F&& f) {
  if (ds.input_dim() != dim && !ds.empty()) {
    throw DimensionError("scaler fitted on " + std::to_string(dim) + " features applied to " +
                         std::to_string(ds.input_dim()));
  }
  SequenceDataset out = ds;
  for (auto& s : out.sequences)
    for (std::size_t t = 0; t < s.length(); ++t) {
      auto row = s.features.row(t);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = f(j, row[j]);
    }
  return out;
}

}  // namespace

Standardizer fit_standardizer(const SequenceDataset& train) {
  const std::size_t n = train.frame_count();
  if (n == 0) throw DegenerateInput("cannot fit a standardizer on an empty dataset");
  const std::size_t dim = train.input_dim();
  Standardizer s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& seq : train.sequences)
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const auto row = seq.features.row(t);
      for (std::size_t j = 0; j < dim; ++j) s.mean[j] += row[j];
    }
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(dim, 0.0);
  for (const auto& seq : train.sequences)
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const auto row = seq.features.row(t);
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = row[j] - s.mean[j];
        var[j] += d * d;
      }
    }
  for (std::size_t j = 0; j < dim; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    s.scale[j] = sd <= 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? 0.0 : sd;
  }
  return s;
}

SequenceDataset apply_standardizer(const Standardizer& s, const SequenceDataset& ds) {
  return map_features(ds, s.mean.size(), [&](std::size_t j, double x) {
    const double scale = s.scale[j] == 0.0 ? 1.0 : s.scale[j];
    return (x - s.mean[j]) / scale;
  });
}

MinMaxScaler fit_minmax(const SequenceDataset& train) {
  if (train.frame_count() == 0) throw DegenerateInput("cannot fit bounds on an empty dataset");
  const std::size_t dim = train.input_dim();
  MinMaxScaler b{std::vector<double>(dim, std::numeric_limits<double>::infinity()),
                 std::vector<double>(dim, -std::numeric_limits<double>::infinity())};
  for (const auto& seq : train.sequences)
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const auto row = seq.features.row(t);
      for (std::size_t j = 0; j < dim; ++j) {
        b.min[j] = std::min(b.min[j], row[j]);
        b.max[j] = std::max(b.max[j], row[j]);
      }
    }
  return b;
}

SequenceDataset minmax_rescale(const SequenceDataset& ds, const MinMaxScaler& bounds) {
  return map_features(ds, bounds.min.size(), [&](std::size_t j, double x) {
    const double range = bounds.max[j] - bounds.min[j];
    return range > 0.0 ? (x - bounds.min[j]) / range : 0.0;
  });
}

// ---------------------------------------------------------------------------
// Targets, decisions and metrics

std::vector<DenseMatrix> one_hot_targets(const SequenceDataset& ds,
                                         std::optional<std::size_t> n_outputs) {
  const std::size_t outputs = n_outputs.value_or(ds.n_classes);
  std::vector<DenseMatrix> out;
  out.reserve(ds.sequences.size());
  for (const auto& s : ds.sequences) {
    DenseMatrix d(s.length(), outputs);
    for (std::size_t t = 0; t < s.length(); ++t) {
      const std::size_t label = ds.task == TaskKind::frame_level ? s.labels.at(t) : s.labels.at(0);
      if (label >= outputs) {
        throw LabelError("label " + std::to_string(label) + " outside [0, " +
                         std::to_string(outputs) + ")");
      }
      d(t, label) = 1.0;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<std::size_t> frame_decisions(const DenseMatrix& y) {
  std::vector<std::size_t> out(y.rows(), 0);
  for (std::size_t t = 0; t < y.rows(); ++t) {
    const auto row = y.row(t);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    out[t] = best;
  }
  return out;
}

std::size_t sequence_decision(const DenseMatrix& y) {
  if (y.rows() == 0) throw DegenerateInput("sequence_decision: empty sequence");
  std::vector<double> sums(y.cols(), 0.0);
  for (std::size_t t = 0; t < y.rows(); ++t) {
    const auto row = y.row(t);
    for (std::size_t j = 0; j < row.size(); ++j) sums[j] += row[j];
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < sums.size(); ++j)
    if (sums[j] > sums[best]) best = j;
  return best;
}

double mse(const DenseMatrix& y, const DenseMatrix& d) {
  if (y.rows() != d.rows() || y.cols() != d.cols()) throw DimensionError("mse: shape mismatch");
  const auto a = y.values();
  const auto b = d.values();
  if (a.empty()) throw DegenerateInput("mse: empty operands");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    s += e * e;
  }
  return s / static_cast<double>(a.size());
}

namespace {
double error_rate(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                  const char* name) {
  if (predicted.size() != truth.size()) {
    throw DimensionError(std::string(name) + ": prediction and truth lengths differ");
  }
  if (truth.empty()) throw DegenerateInput(std::string(name) + ": no labels");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) errors += predicted[i] != truth[i] ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}
}  // namespace

double fer(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  return error_rate(predicted, truth, "fer");
}

double cer(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  return error_rate(predicted, truth, "cer");
}

std::vector<std::vector<std::uint64_t>> confusion_matrix(std::span<const std::size_t> predicted,
                                                         std::span<const std::size_t> truth,
                                                         std::size_t n_classes) {
  if (predicted.size() != truth.size()) throw DimensionError("confusion_matrix: length mismatch");
  std::vector<std::vector<std::uint64_t>> m(n_classes, std::vector<std::uint64_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n_classes || predicted[i] >= n_classes) {
      throw LabelError("confusion_matrix: label outside [0, " + std::to_string(n_classes) + ")");
    }
    ++m[truth[i]][predicted[i]];
  }
  return m;
}

DatasetStats describe(const SequenceDataset& ds) {
  if (ds.empty()) throw DegenerateInput("describe: empty dataset");
  DatasetStats st;
  st.input_dim = ds.input_dim();
  st.sequences = ds.sequences.size();
  st.outputs = ds.n_classes;
  st.task = ds.task;
  st.t_min = std::numeric_limits<std::size_t>::max();
  for (const auto& s : ds.sequences) {
    st.samples += s.length();
    st.t_min = std::min(st.t_min, s.length());
    st.t_max = std::max(st.t_max, s.length());
  }
  st.t_mean = static_cast<double>(st.samples) / static_cast<double>(st.sequences);
  return st;
}

}  // namespace kmesn
