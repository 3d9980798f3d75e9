#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "den/common.hpp"

namespace den {

enum class TaskKind { Regression, BinaryClassification };

/// One model evaluated on the dataset: raw predictions and ground truth.
struct ModelRun {
  std::string name;
  std::vector<double> predictions;
  std::vector<double> labels;
  TaskKind task_kind = TaskKind::Regression;
};

/// Categorical labels in dense encoding: codes[i] indexes into categories.
struct LabelColumn {
  std::vector<std::uint32_t> codes;
  std::vector<std::string> categories;

  std::size_t size() const { return codes.size(); }
  std::size_t n_categories() const { return categories.size(); }

  static LabelColumn from_strings(std::span<const std::string> values) {
    LabelColumn col;
    std::map<std::string, std::uint32_t> index;
    col.codes.reserve(values.size());
    for (const auto& v : values) {
      auto [it, inserted] =
          index.emplace(v, static_cast<std::uint32_t>(col.categories.size()));
      if (inserted) col.categories.push_back(v);
      col.codes.push_back(it->second);
    }
    return col;
  }
};

/// The evaluation unit: proxy embeddings, per-datapoint errors, and any
/// ground-truth labelings available for validation. Immutable once built;
/// all operations on it are pure.
struct Dataset {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<float> embeddings;  // row-major n x dim
  std::vector<double> errors;     // e_i >= 0, one per datapoint
  std::optional<LabelColumn> identity;
  std::vector<std::pair<std::string, LabelColumn>> groups;

  std::span<const float> embedding_row(std::size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }

  const LabelColumn* find_group(const std::string& name) const {
    for (const auto& [gname, col] : groups)
      if (gname == name) return &col;
    return nullptr;
  }
};

/// Per-datapoint error |y_hat - y| for regression; 0/1 misclassification
/// for binary tasks, thresholding real predictions at 0.5 (>= 0.5 reads
/// as class 1).
inline std::vector<double> per_datapoint_error(const ModelRun& run) {
  if (run.predictions.size() != run.labels.size())
    throw std::invalid_argument(
        "per_datapoint_error: predictions and labels differ in length (" +
        std::to_string(run.predictions.size()) + " vs " +
        std::to_string(run.labels.size()) + ")");
  const std::size_t n = run.predictions.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = run.predictions[i];
    const double y = run.labels[i];
    if (!std::isfinite(p))
      throw DataError("per_datapoint_error: non-finite prediction at index " +
                      std::to_string(i));
    if (!std::isfinite(y))
      throw DataError("per_datapoint_error: non-finite label at index " +
                      std::to_string(i));
    if (run.task_kind == TaskKind::Regression) {
      out[i] = std::abs(p - y);
    } else {
      if (y != 0.0 && y != 1.0)
        throw DataError(
            "per_datapoint_error: binary label outside {0,1} at index " +
            std::to_string(i));
      const double predicted = p >= 0.5 ? 1.0 : 0.0;
      out[i] = predicted == y ? 0.0 : 1.0;
    }
  }
  return out;
}

struct Violation {
  std::string field;                 // e.g. "errors", "groups[Male]"
  std::optional<std::size_t> index;  // offending element, when applicable
  std::string message;
};

/// Reports every invariant violation found; an empty result means valid.
inline std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  if (ds.n > 0 && ds.dim == 0)
    out.push_back({"embeddings", std::nullopt, "dimension must be >= 1"});
  if (ds.embeddings.size() != ds.n * ds.dim)
    out.push_back({"embeddings", std::nullopt,
                   "expected " + std::to_string(ds.n * ds.dim) +
                       " values, got " + std::to_string(ds.embeddings.size())});
  else
    for (std::size_t i = 0; i < ds.embeddings.size(); ++i)
      if (!std::isfinite(ds.embeddings[i])) {
        out.push_back({"embeddings", i / std::max<std::size_t>(ds.dim, 1),
                       "non-finite value in row " +
                           std::to_string(i / std::max<std::size_t>(ds.dim, 1)) +
                           ", column " +
                           std::to_string(i % std::max<std::size_t>(ds.dim, 1))});
        break;
      }
  if (ds.errors.size() != ds.n)
    out.push_back({"errors", std::nullopt,
                   "expected " + std::to_string(ds.n) + " values, got " +
                       std::to_string(ds.errors.size())});
  else
    for (std::size_t i = 0; i < ds.errors.size(); ++i) {
      if (!std::isfinite(ds.errors[i]))
        out.push_back({"errors", i, "non-finite error"});
      else if (ds.errors[i] < 0.0)
        out.push_back({"errors", i, "negative error"});
    }

  auto check_labels = [&](const std::string& field, const LabelColumn& col) {
    if (col.size() != ds.n) {
      out.push_back({field, std::nullopt,
                     "expected " + std::to_string(ds.n) + " labels, got " +
                         std::to_string(col.size())});
      return;
    }
    for (std::size_t i = 0; i < col.codes.size(); ++i)
      if (col.codes[i] >= col.n_categories()) {
        out.push_back({field, i, "label code out of range"});
        break;
      }
  };
  if (ds.identity) check_labels("identity", *ds.identity);
  for (const auto& [name, col] : ds.groups)
    check_labels("groups[" + name + "]", col);
  return out;
}

}  // namespace den
