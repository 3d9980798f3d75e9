#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "den/common.hpp"
#include "den/dataset.hpp"
#include "den/disparity.hpp"

namespace den {

/// Hierarchical Gaussian layout: group centers, identity centers around
/// them, samples around those, with per-group planted error means.
struct SynthConfig {
  std::size_t n_groups = 2;
  std::size_t ids_per_group = 20;
  std::size_t samples_per_id = 10;
  std::size_t dim = 8;
  double group_sep = 10.0;
  double id_sep = 1.0;
  double sample_spread = 0.1;
  std::vector<double> group_error_means = {0.1, 0.4};
  double error_noise = 0.1;
  std::uint64_t seed = 0;
  std::size_t max_points = 1'000'000;

  std::size_t n_points() const {
    return n_groups * ids_per_group * samples_per_id;
  }
};

namespace detail {

// den-rng v1, fixed so generated datasets are reproducible everywhere:
//   - engine: std::mt19937_64 seeded with the stream seed
//   - uniform double u in [0, 1): (engine() >> 11) * 2^-53
//   - standard normal: Box-Muller, z = sqrt(-2 ln(1-u1)) * cos(2 pi u2),
//     consuming exactly two uniforms per draw, no caching
// Substreams (structure, errors, per-model errors) derive their seeds via
// substream_seed so adding models never shifts earlier draws.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

constexpr std::uint64_t kStructureStream = 0;
constexpr std::uint64_t kErrorStream = 1;
constexpr std::uint64_t kModelStreamBase = 2;

inline void check_synth_config(const SynthConfig& cfg) {
  if (cfg.n_groups == 0 || cfg.ids_per_group == 0 || cfg.samples_per_id == 0)
    throw std::invalid_argument("synth: counts must be positive");
  if (cfg.dim == 0) throw std::invalid_argument("synth: dim must be >= 1");
  if (cfg.group_sep < 0.0 || cfg.id_sep < 0.0 || cfg.sample_spread < 0.0 ||
      cfg.error_noise < 0.0)
    throw std::invalid_argument("synth: scales must be >= 0");
  if (cfg.group_error_means.size() != cfg.n_groups)
    throw std::invalid_argument(
        "synth: group_error_means must have one value per group");
  for (double m : cfg.group_error_means)
    if (!(m >= 0.0) || !std::isfinite(m))
      throw std::invalid_argument("synth: group error means must be finite >= 0");
  if (cfg.n_points() > cfg.max_points)
    throw std::invalid_argument("synth: " + std::to_string(cfg.n_points()) +
                                " points exceed the budget of " +
                                std::to_string(cfg.max_points));
}

// Embeddings, labels, and per-point group index, in generation order:
// groups outermost, then identities, then samples.
struct SynthStructure {
  std::vector<float> embeddings;
  std::vector<std::uint32_t> group_of;  // per point
  LabelColumn identity;
  LabelColumn group;
};

inline SynthStructure generate_structure(const SynthConfig& cfg) {
  SynthStructure st;
  const std::size_t n = cfg.n_points();
  st.embeddings.reserve(n * cfg.dim);
  st.group_of.reserve(n);
  st.identity.codes.reserve(n);
  st.group.codes.reserve(n);

  NormalSampler rng(substream_seed(cfg.seed, kStructureStream));
  std::vector<double> group_center(cfg.dim), id_center(cfg.dim);
  for (std::size_t g = 0; g < cfg.n_groups; ++g) {
    st.group.categories.push_back("g" + std::to_string(g));
    for (std::size_t t = 0; t < cfg.dim; ++t)
      group_center[t] = cfg.group_sep * rng.normal();
    for (std::size_t id = 0; id < cfg.ids_per_group; ++id) {
      st.identity.categories.push_back("g" + std::to_string(g) + "_id" +
                                       std::to_string(id));
      const auto id_code =
          static_cast<std::uint32_t>(st.identity.categories.size() - 1);
      for (std::size_t t = 0; t < cfg.dim; ++t)
        id_center[t] = group_center[t] + cfg.id_sep * rng.normal();
      for (std::size_t s = 0; s < cfg.samples_per_id; ++s) {
        for (std::size_t t = 0; t < cfg.dim; ++t)
          st.embeddings.push_back(static_cast<float>(
              id_center[t] + cfg.sample_spread * rng.normal()));
        st.group_of.push_back(static_cast<std::uint32_t>(g));
        st.identity.codes.push_back(id_code);
        st.group.codes.push_back(static_cast<std::uint32_t>(g));
      }
    }
  }
  return st;
}

inline std::vector<double> draw_errors(const std::vector<std::uint32_t>& group_of,
                                       const std::vector<double>& means,
                                       double noise, std::uint64_t stream_seed) {
  NormalSampler rng(stream_seed);
  std::vector<double> errors;
  errors.reserve(group_of.size());
  for (std::uint32_t g : group_of)
    errors.push_back(std::max(0.0, means[g] + noise * rng.normal()));
  return errors;
}

}  // namespace detail

/// Deterministic synthetic dataset: identical config (seed included)
/// reproduces it bit for bit.
inline Dataset generate_synthetic_dataset(const SynthConfig& cfg) {
  detail::check_synth_config(cfg);
  auto st = detail::generate_structure(cfg);
  Dataset ds;
  ds.n = cfg.n_points();
  ds.dim = cfg.dim;
  ds.embeddings = std::move(st.embeddings);
  ds.errors = detail::draw_errors(st.group_of, cfg.group_error_means,
                                  cfg.error_noise,
                                  detail::substream_seed(cfg.seed,
                                                         detail::kErrorStream));
  ds.identity = std::move(st.identity);
  ds.groups.emplace_back("group", std::move(st.group));
  return ds;
}

struct PlantedModel {
  std::string name;
  std::vector<double> errors;
  double group_disparity = 0.0;  // exact planted Rawlsian disparity
};

struct ModelFamily {
  Dataset dataset;  // shared embeddings and labels; errors of the first model
  std::vector<PlantedModel> models;
};

/// Family of models over one shared embedding/label structure. Model j
/// gets planted group error means whose Rawlsian gap walks linearly from
/// `low` to `high`; the returned disparity is the exact planted value.
inline ModelFamily generate_model_family(const SynthConfig& cfg,
                                         std::size_t n_models, double low,
                                         double high) {
  detail::check_synth_config(cfg);
  if (n_models < 3)
    throw std::invalid_argument("model family: needs n_models >= 3");
  if (!(low < high))
    throw std::invalid_argument("model family: disparity range must satisfy low < high");
  if (!(low >= 0.0) || !(high < 1.0))
    throw std::invalid_argument("model family: disparity range must lie in [0, 1)");
  double base = 0.0;
  for (double m : cfg.group_error_means) base = std::max(base, m);
  if (base <= 0.0)
    throw std::invalid_argument(
        "model family: max group error mean must be > 0 to scale planted gaps");

  auto st = detail::generate_structure(cfg);
  ModelFamily family;
  family.dataset.n = cfg.n_points();
  family.dataset.dim = cfg.dim;
  family.dataset.embeddings = std::move(st.embeddings);
  family.dataset.identity = std::move(st.identity);
  family.dataset.groups.emplace_back("group", std::move(st.group));

  for (std::size_t j = 0; j < n_models; ++j) {
    const double frac = static_cast<double>(j) /
                        static_cast<double>(n_models - 1);
    const double target = low + frac * (high - low);
    // group means rise linearly from base*(1 - target) to base, so the
    // planted Rawlsian disparity is exactly 1 - min/max
    std::vector<double> means(cfg.n_groups);
    for (std::size_t g = 0; g < cfg.n_groups; ++g) {
      const double gf = cfg.n_groups == 1
                            ? 1.0
                            : static_cast<double>(g) /
                                  static_cast<double>(cfg.n_groups - 1);
      means[g] = base * (1.0 - target * (1.0 - gf));
    }
    PlantedModel model;
    model.name = "model_" + std::to_string(j);
    model.errors = detail::draw_errors(
        st.group_of, means, cfg.error_noise,
        detail::substream_seed(cfg.seed, detail::kModelStreamBase + j));
    model.group_disparity =
        means.front() == means.back() ? 0.0
                                      : 1.0 - means.front() / means.back();
    family.models.push_back(std::move(model));
  }
  family.dataset.errors = family.models.front().errors;
  return family;
}

}  // namespace den
