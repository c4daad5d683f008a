#pragma once

#include <string_view>
#include <vector>

#include "nowcast/forecaster.hpp"
#include "nowcast/geometry.hpp"

namespace nowcast {

// Members of the geometric augmentation ensemble. Identity membership is
// always explicit. Presets: `identity` = {id}; `paper_main` = {id, vflip};
// `paper_full` = the five-member policy plus the identity.
struct EnsembleConfig {
  std::vector<GeomTransform> members;

  void validate() const;  // non-empty, distinct
};

EnsembleConfig ensemble_preset(std::string_view name);

// (1/n) * sum_i inverse(g_i)(sigmoid(model(g_i(x)))). Members are summed in
// canonical group order, so permuting the member list cannot change the
// output. Probabilities stay within the convex hull of the member
// predictions.
Tensor ensemble_predict(const ForwardFn& model, const Tensor& x,
                        const EnsembleConfig& cfg);

// Mean absolute difference between inverse(g)(F(g(x))) and F(x) as
// probability maps; zero iff the model is exactly g-equivariant at x.
double equivariance_gap(const ForwardFn& model, const Tensor& x,
                        const GeomTransform& g);

}  // namespace nowcast
