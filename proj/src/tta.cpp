#include "nowcast/tta.hpp"

#include <algorithm>
#include <cmath>

#include "nowcast/error.hpp"

namespace nowcast {

void EnsembleConfig::validate() const {
  if (members.empty()) throw ConfigError("ensemble needs at least one member");
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      if (members[i] == members[j])
        throw ConfigError("ensemble members must be distinct: " +
                          to_string(members[i]));
    }
  }
}

EnsembleConfig ensemble_preset(std::string_view name) {
  if (name == "identity") return {{d4::identity}};
  if (name == "paper_main") return {{d4::identity, d4::vflip}};
  if (name == "paper_full") {
    EnsembleConfig cfg{{d4::identity}};
    const AugPolicy& policy = paper_policy();
    cfg.members.insert(cfg.members.end(), policy.members.begin(),
                       policy.members.end());
    return cfg;
  }
  throw ConfigError("unknown ensemble preset: " + std::string(name));
}

Tensor ensemble_predict(const ForwardFn& model, const Tensor& x,
                        const EnsembleConfig& cfg) {
  cfg.validate();
  std::vector<GeomTransform> members = cfg.members;
  // Canonical member order makes the sum independent of list order.
  std::sort(members.begin(), members.end(),
            [](const GeomTransform& a, const GeomTransform& b) {
              return std::pair(a.quarter_turns, a.vflip) <
                     std::pair(b.quarter_turns, b.vflip);
            });

  Tensor acc;
  bool started = false;
  for (const GeomTransform& g : members) {
    const Tensor prob = sigmoid(model(apply(g, x)));
    Tensor back = apply(inverse(g), prob);
    if (!started) {
      acc = std::move(back);
      started = true;
    } else {
      if (!acc.same_shape(back))
        throw ConfigError("ensemble member changed the prediction shape: " +
                          to_string(g));
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += back[i];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(members.size());
  for (double& v : acc.values()) v *= inv_n;
  return acc;
}

double equivariance_gap(const ForwardFn& model, const Tensor& x,
                        const GeomTransform& g) {
  const Tensor direct = sigmoid(model(x));
  const Tensor mapped = apply(inverse(g), sigmoid(model(apply(g, x))));
  if (!direct.same_shape(mapped))
    throw ConfigError("transform changed the prediction shape: " + to_string(g));
  double acc = 0.0;
  for (std::size_t i = 0; i < direct.size(); ++i)
    acc += std::abs(direct[i] - mapped[i]);
  return acc / static_cast<double>(direct.size());
}

}  // namespace nowcast
