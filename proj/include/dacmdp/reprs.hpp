#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace dacmdp {

// Maps raw observations into the latent space the neighbor machinery
// operates in. Identity, or a fixed seeded random linear projection with
// N(0, 1/out_dim) entries. Projections compute in double; datasets store the
// f32 narrowing (embed_f32 / embed_dataset), and policy-side queries use the
// same narrowing, so acting on raw observations through a representation
// matches acting on a pre-embedded dataset.
class Representation {
public:
  enum class Kind { identity, random_projection, standardize };

  static Representation identity(int dim) {
    if (dim < 1) throw ConfigError("representation dim must be >= 1");
    Representation r;
    r.kind_ = Kind::identity;
    r.in_dim_ = r.out_dim_ = dim;
    return r;
  }

  // Per-dimension z-scoring fitted on a dataset's source states. Off by
  // default everywhere; distances are otherwise taken in raw representation
  // units.
  static Representation standardizer(const ExperienceDataset& ds) {
    ds.validate();
    Representation r;
    r.kind_ = Kind::standardize;
    r.in_dim_ = r.out_dim_ = ds.state_dim;
    std::vector<double> mean(std::size_t(ds.state_dim), 0.0);
    std::vector<double> var(std::size_t(ds.state_dim), 0.0);
    for (const auto& t : ds.tuples)
      for (int c = 0; c < ds.state_dim; ++c) mean[std::size_t(c)] += t.state[std::size_t(c)];
    for (auto& m : mean) m /= double(ds.size());
    for (const auto& t : ds.tuples)
      for (int c = 0; c < ds.state_dim; ++c) {
        const double d = t.state[std::size_t(c)] - mean[std::size_t(c)];
        var[std::size_t(c)] += d * d;
      }
    r.shift_ = std::move(mean);
    r.scale_.resize(std::size_t(ds.state_dim));
    for (int c = 0; c < ds.state_dim; ++c) {
      const double sd = std::sqrt(var[std::size_t(c)] / double(ds.size()));
      r.scale_[std::size_t(c)] = sd > 0.0 ? 1.0 / sd : 1.0;  // constant dims pass through
    }
    return r;
  }

  static Representation random_projection(int in_dim, int out_dim, uint64_t seed) {
    if (in_dim < 1 || out_dim < 1) throw ConfigError("representation dims must be >= 1");
    Representation r;
    r.kind_ = Kind::random_projection;
    r.in_dim_ = in_dim;
    r.out_dim_ = out_dim;
    r.matrix_.resize(std::size_t(out_dim) * in_dim);
    SeededRng rng(seed);
    const double scale = 1.0 / std::sqrt(double(out_dim));
    for (auto& v : r.matrix_) v = rng.normal() * scale;
    return r;
  }

  Kind kind() const { return kind_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

  std::vector<double> embed(std::span<const float> obs) const {
    if (int(obs.size()) != in_dim_)
      throw ConfigError("embed: observation dim " + std::to_string(obs.size()) +
                        " != representation input dim " + std::to_string(in_dim_));
    if (kind_ == Kind::identity) return {obs.begin(), obs.end()};
    if (kind_ == Kind::standardize) {
      std::vector<double> out(static_cast<std::size_t>(out_dim_));
      for (int c = 0; c < in_dim_; ++c)
        out[std::size_t(c)] = (double(obs[c]) - shift_[std::size_t(c)]) * scale_[std::size_t(c)];
      return out;
    }
    std::vector<double> out(std::size_t(out_dim_), 0.0);
    for (int r = 0; r < out_dim_; ++r) {
      const double* row = matrix_.data() + std::size_t(r) * in_dim_;
      double acc = 0.0;
      for (int c = 0; c < in_dim_; ++c) acc += row[c] * double(obs[c]);
      out[std::size_t(r)] = acc;
    }
    return out;
  }

  std::vector<float> embed_f32(std::span<const float> obs) const {
    if (kind_ == Kind::identity) {
      if (int(obs.size()) != in_dim_) throw ConfigError("embed: observation dim mismatch");
      return {obs.begin(), obs.end()};
    }
    const auto d = embed(obs);
    return {d.begin(), d.end()};
  }

private:
  Kind kind_ = Kind::identity;
  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<double> matrix_;
  std::vector<double> shift_, scale_;  // standardize only
};

inline std::vector<double> embed(const Representation& r, std::span<const float> obs) {
  return r.embed(obs);
}

inline ExperienceDataset embed_dataset(const ExperienceDataset& ds, const Representation& r) {
  ExperienceDataset out;
  out.action_count = ds.action_count;
  out.state_dim = r.out_dim();
  out.metadata = ds.metadata;
  out.tuples.reserve(ds.size());
  for (const auto& t : ds.tuples)
    out.tuples.push_back({r.embed_f32(t.state), t.action, t.reward, r.embed_f32(t.next_state),
                          t.terminal});
  out.validate();
  return out;
}

} // namespace dacmdp
