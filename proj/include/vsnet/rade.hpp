#ifndef VSNET_RADE_HPP
#define VSNET_RADE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gossip.hpp"
#include "sensing.hpp"
#include "topology.hpp"

namespace vsnet {

struct Tolerance {
  double eps_abs = 1e-4;
  double eps_rel = 1e-4;

  void validate() const {
    if (!(eps_abs > 0.0) || !(eps_rel > 0.0))
      throw std::invalid_argument("tolerances must be positive");
  }
};

// How a pair penalty is derived from the configured rho.
//   uniform: every pair gets rho.
//   degree:  pair (i,j) gets 2 rho / (|N[i]| + |N[j]|), self pair rho / |N[i]|,
//            where N[i] is the closed neighborhood. Each sensor then carries about rho in total.
enum class RhoScaling { uniform, degree };

// gradient: weighted mean that zeroes the Lagrangian gradient. plain_mean: plain 1/V scaling.
enum class ZNormalization { gradient, plain_mean };

struct PenaltyConfig {
  double rho = 1.0;
  RhoScaling scaling = RhoScaling::uniform;

  double pair(std::size_t closed_i, std::size_t closed_j, bool self) const {
    if (scaling == RhoScaling::uniform)
      return rho;
    if (self)
      return rho / static_cast<double>(closed_i);
    return 2.0 * rho / static_cast<double>(closed_i + closed_j);
  }

  void validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw std::invalid_argument("rho must be positive");
  }
};

struct ThetaTerm {
  double rho;
  const Vec& lambda;
  const Vec& z;
};

struct ZTerm {
  double rho;
  const Vec& theta;
  const Vec& lambda;
};

/// Primal step: (H'H + sum rho I)^-1 (H'y + sum (lambda + rho z)).
inline Vec theta_update(const MeasurementModel& model, std::span<const ThetaTerm> terms) {
  const Eigen::Index n = model.h.cols();
  Mat a = model.h.transpose() * model.h;
  Vec b = model.h.transpose() * model.y;
  double rsum = 0.0;
  for (const auto& t : terms) {
    rsum += t.rho;
    b += t.lambda + t.rho * t.z;
  }
  a.diagonal().array() += rsum;
  Eigen::LDLT<Mat> ldlt(a);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
    throw singular_system("theta update system is singular");
  Vec out = ldlt.solve(b);
  if (out.size() != n || !out.allFinite())
    throw singular_system("theta update produced non-finite values");
  return out;
}

/// Auxiliary step over the pairs (j,i) feeding sensor i.
inline Vec z_update(std::span<const ZTerm> terms, ZNormalization norm = ZNormalization::gradient,
                    int v_count = 0) {
  if (terms.empty())
    throw std::invalid_argument("z update needs at least one coupling");
  Vec acc = Vec::Zero(terms.front().theta.size());
  if (norm == ZNormalization::plain_mean) {
    if (v_count < 1)
      throw std::invalid_argument("plain-mean normalization needs V");
    for (const auto& t : terms)
      acc += t.theta - t.lambda / t.rho;
    return acc / static_cast<double>(v_count);
  }
  double rsum = 0.0;
  for (const auto& t : terms) {
    acc += t.rho * t.theta - t.lambda;
    rsum += t.rho;
  }
  return acc / rsum;
}

inline Vec lambda_update(const Vec& lambda, double rho, const Vec& theta, const Vec& z) {
  return lambda - rho * (theta - z);
}

struct StopFlags {
  bool primal_ok = false;
  bool dual_ok = false;
  bool both() const { return primal_ok && dual_ok; }
};

/// Residual form. scaled_lambda_sum is sum over incoming pairs of ||rho * lambda||.
inline StopFlags stopping_check(double primal_residual, double dual_residual, double theta_norm, double z_norm,
                                double scaled_lambda_sum, const Tolerance& tol, int v_count) {
  const double base = std::sqrt(static_cast<double>(v_count)) * tol.eps_abs;
  const double pri = base + tol.eps_rel * std::max(theta_norm, z_norm);
  const double dual = base + tol.eps_rel * scaled_lambda_sum;
  return {primal_residual < pri, dual_residual < dual};
}

struct RhoLambda {
  double rho;
  const Vec& lambda;
};

inline StopFlags stopping_check(const Vec& theta, const Vec& z, const Vec& z_prev,
                                std::span<const RhoLambda> incoming, const Tolerance& tol, int v_count) {
  double s = 0.0;
  for (const auto& rl : incoming)
    s += (rl.rho * rl.lambda).norm();
  return stopping_check((theta - z).norm(), (z - z_prev).norm(), theta.norm(), z.norm(), s, tol, v_count);
}

struct EstimateResult {
  std::vector<Vec> estimates;
  std::size_t iterations = 0; // rounds for ADMM, slots for RADE
  std::uint64_t messages = 0;
  std::vector<std::uint64_t> messages_per_sensor;
  bool converged = false;

  double mean_mse(const Vec& truth) const {
    double s = 0.0;
    for (const auto& e : estimates)
      s += mse(e, truth);
    return estimates.empty() ? 0.0 : s / static_cast<double>(estimates.size());
  }
};

struct EstimatorOptions {
  Tolerance tol;
  PenaltyConfig penalty;
  ZNormalization z_norm = ZNormalization::gradient;
  bool disjoint_pairs = false; // RADE only
};

namespace detail {

inline void check_task(const VirtualGraph& g, const EstimationTask& task) {
  if (g.size() == 0 || g.size() != task.models.size())
    throw std::invalid_argument("task must have one model per virtual sensor");
}

inline Vec local_ls(const MeasurementModel& m) {
  return solve_spd(m.h.transpose() * m.h, m.h.transpose() * m.y);
}

inline std::size_t directed_links(const VirtualGraph& g) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    d += g.degree(static_cast<int>(i));
  return d;
}

} // namespace detail

/// Per-sensor estimator variables over closed neighborhoods N[i] = N(i) + {i}.
/// lambda[i][k] belongs to the directed pair (i, closed[i][k]).
struct EstimatorState {
  std::vector<std::vector<int>> closed;
  std::vector<std::vector<double>> rho;
  std::vector<std::vector<Vec>> lambda;
  std::vector<Vec> theta;
  std::vector<Vec> z;
  std::size_t iteration = 0;
  std::vector<std::uint64_t> messages;
  std::vector<StopFlags> flags;

  EstimatorState(const VirtualGraph& g, Eigen::Index n, const PenaltyConfig& pc) {
    const std::size_t v = g.size();
    closed.resize(v);
    for (std::size_t i = 0; i < v; ++i) {
      closed[i] = g.neighbors(static_cast<int>(i));
      closed[i].insert(std::lower_bound(closed[i].begin(), closed[i].end(), static_cast<int>(i)),
                       static_cast<int>(i));
    }
    rho.resize(v);
    lambda.resize(v);
    for (std::size_t i = 0; i < v; ++i)
      for (int j : closed[i]) {
        rho[i].push_back(pc.pair(closed[i].size(), closed[j].size(), j == static_cast<int>(i)));
        lambda[i].push_back(Vec::Zero(n));
      }
    theta.assign(v, Vec::Zero(n));
    z.assign(v, Vec::Zero(n));
    messages.assign(v, 0);
    flags.assign(v, StopFlags{});
  }

  // Position of j inside closed[i].
  std::size_t slot(int i, int j) const {
    const auto& c = closed[static_cast<std::size_t>(i)];
    return static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), j) - c.begin());
  }
};

/// Synchronous consensus ADMM. Each round: every theta, then every z, then every multiplier.
/// Each round costs theta and z from every sensor to every neighbor.
inline EstimateResult admm_run(const VirtualGraph& g, const EstimationTask& task, const EstimatorOptions& opt,
                               std::size_t max_iters) {
  detail::check_task(g, task);
  opt.tol.validate();
  opt.penalty.validate();
  const std::size_t v = g.size();
  const int vi = static_cast<int>(v);
  EstimateResult res;
  res.messages_per_sensor.assign(v, 0);
  if (detail::directed_links(g) == 0) {
    for (const auto& m : task.models)
      res.estimates.push_back(detail::local_ls(m));
    res.iterations = 1;
    res.converged = true;
    return res;
  }
  EstimatorState st(g, task.dim(), opt.penalty);
  for (std::size_t k = 1; k <= max_iters; ++k) {
    for (std::size_t i = 0; i < v; ++i) {
      std::vector<ThetaTerm> terms;
      for (std::size_t a = 0; a < st.closed[i].size(); ++a)
        terms.push_back({st.rho[i][a], st.lambda[i][a], st.z[st.closed[i][a]]});
      st.theta[i] = theta_update(task.models[i], terms);
    }
    std::vector<Vec> z_prev = st.z;
    for (std::size_t i = 0; i < v; ++i) {
      std::vector<ZTerm> terms;
      for (int j : st.closed[i]) {
        const std::size_t b = st.slot(j, static_cast<int>(i));
        terms.push_back({st.rho[j][b], st.theta[j], st.lambda[j][b]});
      }
      st.z[i] = z_update(terms, opt.z_norm, vi);
    }
    for (std::size_t j = 0; j < v; ++j)
      for (std::size_t b = 0; b < st.closed[j].size(); ++b)
        st.lambda[j][b] = lambda_update(st.lambda[j][b], st.rho[j][b], st.theta[j], st.z[st.closed[j][b]]);
    bool all = true;
    for (std::size_t i = 0; i < v; ++i) {
      std::vector<RhoLambda> incoming;
      for (int j : st.closed[i]) {
        const std::size_t b = st.slot(j, static_cast<int>(i));
        incoming.push_back({st.rho[j][b], st.lambda[j][b]});
      }
      st.flags[i] = stopping_check(st.theta[i], st.z[i], z_prev[i], incoming, opt.tol, vi);
      all = all && st.flags[i].both();
      st.messages[i] += 2 * g.degree(static_cast<int>(i));
    }
    st.iteration = k;
    if (all) {
      res.converged = true;
      break;
    }
  }
  res.estimates = st.theta;
  res.iterations = st.iteration;
  res.messages_per_sensor = st.messages;
  for (auto m : st.messages)
    res.messages += m;
  return res;
}

/// Gossip state of the randomized estimator.
///
/// Every virtual link e = (a,b) carries its own consensus variable z_e and one multiplier per
/// endpoint. A contact over e lets both endpoints refresh theta, exchange theta where the owner's
/// primal test still fails (otherwise the last transmitted value stands in), and then update z_e
/// and both multipliers identically on each side. Nothing else moves, so z is never transmitted.
class RadeProtocol {
public:
  RadeProtocol(const VirtualGraph& g, const EstimationTask& task, const EstimatorOptions& opt)
      : g_(g), task_(task), opt_(opt), v_(static_cast<int>(g.size())) {
    const Eigen::Index n = task.dim();
    for (auto [a, b] : g.links()) {
      Link l;
      l.a = a;
      l.b = b;
      l.rho = opt.penalty.pair(g.degree(a) + 1, g.degree(b) + 1, false);
      l.z = Vec::Zero(n);
      l.lambda_a = Vec::Zero(n);
      l.lambda_b = Vec::Zero(n);
      l.sent_a = Vec::Zero(n);
      l.sent_b = Vec::Zero(n);
      links_.push_back(std::move(l));
    }
    incident_.resize(g.size());
    for (std::size_t e = 0; e < links_.size(); ++e) {
      incident_[links_[e].a].push_back(e);
      incident_[links_[e].b].push_back(e);
    }
    theta_.assign(g.size(), Vec::Zero(n));
    snapshot_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      snapshot_[i] = Vec::Zero(n * static_cast<Eigen::Index>(incident_[i].size()));
    flags_.assign(g.size(), StopFlags{});
    busy_.assign(g.size(), 0);
  }

  bool is_active(SensorId i) const { return !flags_[i].both(); }

  void begin_slot(std::size_t) { std::fill(busy_.begin(), busy_.end(), 0); }

  void on_contact(SensorId i, SensorId j, MessageSink& sink) {
    if (flags_[i].both())
      return;
    if (opt_.disjoint_pairs) {
      if (busy_[i] || busy_[j])
        return;
      busy_[i] = busy_[j] = 1;
    }
    Link& l = links_[link_index(i, j)];
    refresh_theta(i);
    refresh_theta(j);
    if (!flags_[i].primal_ok) {
      sent(l, i) = theta_[i];
      sink.send(i, j, "theta", SizeClass::n_vector);
    }
    if (!flags_[j].primal_ok) {
      sent(l, j) = theta_[j];
      sink.send(j, i, "theta", SizeClass::n_vector);
    }
    const ZTerm terms[] = {{l.rho, l.sent_a, l.lambda_a}, {l.rho, l.sent_b, l.lambda_b}};
    l.z = z_update(terms);
    l.lambda_a = lambda_update(l.lambda_a, l.rho, l.sent_a, l.z);
    l.lambda_b = lambda_update(l.lambda_b, l.rho, l.sent_b, l.z);
    check(i);
    check(j);
  }

  const std::vector<Vec>& estimates() const { return theta_; }
  const std::vector<StopFlags>& flags() const { return flags_; }

  // Penalty-weighted mean of the link variables around i.
  Vec consensus_view(int i) const {
    Vec acc = Vec::Zero(task_.dim());
    double rs = 0.0;
    for (std::size_t e : incident_[i]) {
      acc += links_[e].rho * links_[e].z;
      rs += links_[e].rho;
    }
    return acc / rs;
  }

private:
  struct Link {
    int a = 0, b = 0;
    double rho = 1.0;
    Vec z, lambda_a, lambda_b, sent_a, sent_b;
  };

  std::size_t link_index(int i, int j) const {
    for (std::size_t e : incident_[i])
      if (links_[e].a == j || links_[e].b == j)
        return e;
    throw std::logic_error("contact over a missing virtual link");
  }

  static Vec& sent(Link& l, int who) { return who == l.a ? l.sent_a : l.sent_b; }
  static const Vec& lambda_of(const Link& l, int who) { return who == l.a ? l.lambda_a : l.lambda_b; }

  void refresh_theta(int i) {
    std::vector<ThetaTerm> terms;
    for (std::size_t e : incident_[i])
      terms.push_back({links_[e].rho, lambda_of(links_[e], i), links_[e].z});
    theta_[i] = theta_update(task_.models[i], terms);
  }

  // Primal: worst link disagreement. Dual: movement of the stacked link variables since i last checked.
  void check(int i) {
    const Eigen::Index n = task_.dim();
    Vec stacked(snapshot_[i].size());
    double primal = 0.0, scaled = 0.0;
    for (std::size_t k = 0; k < incident_[i].size(); ++k) {
      const Link& l = links_[incident_[i][k]];
      stacked.segment(static_cast<Eigen::Index>(k) * n, n) = l.z;
      primal = std::max(primal, (theta_[i] - l.z).norm());
      scaled += (l.rho * lambda_of(l, i)).norm();
    }
    const double dual = (stacked - snapshot_[i]).norm();
    snapshot_[i] = std::move(stacked);
    flags_[i] =
        stopping_check(primal, dual, theta_[i].norm(), consensus_view(i).norm(), scaled, opt_.tol, v_);
  }

  const VirtualGraph& g_;
  const EstimationTask& task_;
  EstimatorOptions opt_;
  int v_;
  std::vector<Link> links_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<Vec> theta_;
  std::vector<Vec> snapshot_;
  std::vector<StopFlags> flags_;
  std::vector<char> busy_;
};

/// Randomized asynchronous estimator driven by the gossip engine over the virtual topology.
inline EstimateResult rade_run(const VirtualGraph& g, const EstimationTask& task, const EstimatorOptions& opt,
                               std::uint64_t seed, std::size_t max_slots, EventLog* log = nullptr) {
  detail::check_task(g, task);
  opt.tol.validate();
  opt.penalty.validate();
  EstimateResult res;
  res.messages_per_sensor.assign(g.size(), 0);
  if (g.links().empty()) {
    for (const auto& m : task.models)
      res.estimates.push_back(detail::local_ls(m));
    res.converged = true;
    return res;
  }
  RadeProtocol proto(g, task, opt);
  Rng rng(seed);
  const GossipTrace tr = run_protocol(g, proto, max_slots, rng, log);
  res.estimates = proto.estimates();
  res.iterations = tr.slots_used;
  res.messages = tr.total_messages;
  res.messages_per_sensor = tr.messages_per_sensor;
  res.converged = !tr.timed_out;
  return res;
}

} // namespace vsnet

#endif // VSNET_RADE_HPP
