#include "lebound/family.hpp"

#include <cmath>

namespace lebound {

std::size_t VariationalState::parameter_count() const {
  std::size_t n = 2 * global.dim();
  for (const auto& q : locals) n += 2 * q.dim();
  if (uha) n += uha->log_step_size.size() + 1;
  return n;
}

std::vector<double> VariationalState::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  auto push = [&flat](const GaussianValues& q) {
    flat.insert(flat.end(), q.mean.begin(), q.mean.end());
    flat.insert(flat.end(), q.log_scale.begin(), q.log_scale.end());
  };
  push(global);
  for (const auto& q : locals) push(q);
  if (uha) {
    flat.insert(flat.end(), uha->log_step_size.begin(), uha->log_step_size.end());
    flat.push_back(uha->damping_logit);
  }
  return flat;
}

void VariationalState::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("assign: expected " + std::to_string(parameter_count()) +
                                " parameters, got " + std::to_string(flat.size()));
  }
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& dst) {
    for (double& v : dst) v = flat[pos++];
  };
  take(global.mean);
  take(global.log_scale);
  for (auto& q : locals) {
    take(q.mean);
    take(q.log_scale);
  }
  if (uha) {
    take(uha->log_step_size);
    uha->damping_logit = flat[pos++];
  }
}

StateView<double> view_of(const VariationalState& state) {
  StateView<double> view;
  view.global = state.global;
  view.locals = state.locals;
  if (state.uha) {
    view.uha = constrain_uha<double>(state.uha->log_step_size, state.uha->damping_logit);
  }
  return view;
}

StateView<Var> lift(Tape& tape, const VariationalState& state,
                    std::vector<std::uint32_t>* leaf_handles) {
  if (leaf_handles) {
    leaf_handles->clear();
    leaf_handles->reserve(state.parameter_count());
  }
  auto leaves = [&](const std::vector<double>& values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) {
      out.push_back(tape.leaf(v));
      if (leaf_handles) leaf_handles->push_back(out.back().handle());
    }
    return out;
  };
  auto gaussian = [&](const GaussianValues& q) {
    Gaussian<Var> g;
    g.mean = leaves(q.mean);
    g.log_scale = leaves(q.log_scale);
    return g;
  };

  StateView<Var> view;
  view.global = gaussian(state.global);
  view.locals.reserve(state.locals.size());
  for (const auto& q : state.locals) view.locals.push_back(gaussian(q));
  if (state.uha) {
    const std::vector<Var> log_step = leaves(state.uha->log_step_size);
    const std::vector<Var> logit = leaves({state.uha->damping_logit});
    view.uha = constrain_uha<Var>(log_step, logit[0]);
  }
  return view;
}

VariationalState init_state(const ModelInstance& model, InitMode mode,
                            std::optional<UhaInit> uha) {
  const std::size_t d_theta = model.d_theta();
  const std::size_t d_z = model.d_z();
  VariationalState state;
  state.global = {std::vector<double>(d_theta, 0.0), std::vector<double>(d_theta, 0.0)};
  GaussianValues local{std::vector<double>(d_z, 0.0), std::vector<double>(d_z, 0.0)};

  if (mode == InitMode::prior_matched && model.kind() == ModelKind::conjugate_oracle) {
    // Global prior N(0, prior·I); z_i | θ = 0 ~ N(0, local·I).
    const auto& v = model.variances();
    state.global.log_scale.assign(d_theta, 0.5 * std::log(v.prior));
    local.log_scale.assign(d_z, 0.5 * std::log(v.local));
  }
  // Both models have standard normal priors on θ, and z_i | θ at the
  // prior mean is standard normal too, so prior matching is the default.

  state.locals.assign(model.num_groups(), local);
  if (uha) {
    if (!(uha->step_size > 0.0) || !(uha->damping > 0.0 && uha->damping < 1.0)) {
      throw std::invalid_argument("UHA init needs step_size > 0 and damping in (0, 1)");
    }
    state.uha = UhaValues{std::vector<double>(d_z, std::log(uha->step_size)),
                          std::log(uha->damping / (1.0 - uha->damping))};
  }
  return state;
}

}  // namespace lebound
