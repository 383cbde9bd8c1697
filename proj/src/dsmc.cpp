// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/dsmc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "granbath/checkpoint.hpp"

namespace granbath {

// ---------------------------------------------------------------------------
// Initial data

InitialSpec::Kind InitialSpec::parse_kind(const std::string& name) {
  if (name == "maxwellian") return Kind::Maxwellian;
  if (name == "mixture") return Kind::Mixture;
  if (name == "shell") return Kind::Shell;
  if (name == "ball") return Kind::Ball;
  throw std::invalid_argument("unknown initial distribution '" + name + "'");
}

std::string InitialSpec::kind_name(Kind kind) {
  switch (kind) {
    case Kind::Maxwellian: return "maxwellian";
    case Kind::Mixture: return "mixture";
    case Kind::Shell: return "shell";
    case Kind::Ball: return "ball";
  }
  return "?";
}

void InitialSpec::validate() const {
  if (!u.allFinite() || !u2.allFinite()) throw std::invalid_argument("initial bulk velocity must be finite");
  if (kind == Kind::Maxwellian || kind == Kind::Mixture)
    if (!(theta > 0.0)) throw std::invalid_argument("initial temperature must be positive");
  if (kind == Kind::Mixture) {
    if (!(theta2 > 0.0)) throw std::invalid_argument("second mixture temperature must be positive");
    if (!(weight >= 0.0 && weight <= 1.0)) throw std::invalid_argument("mixture weight must lie in [0, 1]");
  }
  if ((kind == Kind::Shell || kind == Kind::Ball) && !(radius > 0.0))
    throw std::invalid_argument("shell/ball radius must be positive");
}

Velocity InitialSpec::mean() const {
  switch (kind) {
    case Kind::Maxwellian: return u;
    case Kind::Mixture: return weight * u + (1.0 - weight) * u2;
    default: return u;
  }
}

double InitialSpec::energy() const {
  switch (kind) {
    case Kind::Maxwellian: return u.squaredNorm() + 3.0 * theta;
    case Kind::Mixture:
      return weight * (u.squaredNorm() + 3.0 * theta) + (1.0 - weight) * (u2.squaredNorm() + 3.0 * theta2);
    case Kind::Shell: return u.squaredNorm() + radius * radius;
    case Kind::Ball: return u.squaredNorm() + 0.6 * radius * radius;
  }
  return 0.0;
}

Ensemble init_ensemble(const InitialSpec& spec, std::size_t N, std::uint64_t seed) {
  spec.validate();
  if (N < 2) throw std::invalid_argument("ensemble needs at least two particles");
  Ensemble ens;
  ens.seed = seed;
  ens.rng = Rng(mix_seed(seed, 0));
  Rng init(mix_seed(seed, 1));
  ens.v.resize(N);
  for (auto& x : ens.v) {
    switch (spec.kind) {
      case InitialSpec::Kind::Maxwellian: x = spec.u + std::sqrt(spec.theta) * init.gaussian_vector(); break;
      case InitialSpec::Kind::Mixture:
        if (init.uniform() < spec.weight)
          x = spec.u + std::sqrt(spec.theta) * init.gaussian_vector();
        else
          x = spec.u2 + std::sqrt(spec.theta2) * init.gaussian_vector();
        break;
      case InitialSpec::Kind::Shell: x = spec.u + spec.radius * init.unit_vector(); break;
      case InitialSpec::Kind::Ball:
        x = spec.u + spec.radius * std::cbrt(init.uniform()) * init.unit_vector();
        break;
    }
  }
  return ens;
}

Velocity sample_bath_partner(const BathMaxwellian& M, Rng& rng) {
  return M.u0 + std::sqrt(M.theta0) * rng.gaussian_vector();
}

void MajorantConfig::refresh(const std::vector<Velocity>& v, const BathMaxwellian& M) {
  centre.setZero();
  for (const auto& x : v) centre += x;
  centre /= static_cast<double>(v.size());
  radius_self = 0.0;
  radius_bath = 0.0;
  for (const auto& x : v) {
    radius_self = std::max(radius_self, (x - centre).norm());
    radius_bath = std::max(radius_bath, (x - M.u0).norm());
  }
  // any pair is within 2 * radius of each other while every particle stays
  // inside the certificate ball
  radius_self = safety * std::max(radius_self, 1e-12);
  lambda_self = 2.0 * radius_self;
  radius_bath = safety * radius_bath;
  lambda_bath = radius_bath + 7.0 * std::sqrt(M.theta0);
}

// ---------------------------------------------------------------------------
// Stepping

namespace {

struct Event {
  bool bath;
  std::uint32_t i, j;
  double u;
  Velocity sigma;
  Velocity w;
};

struct Outcome {
  bool accepted = false;
  bool violated = false;
  double dE = 0.0;
};

// Fixed-size worker pool running [0, count) split in contiguous chunks.
class Pool {
 public:
  explicit Pool(int workers) {
    for (int k = 1; k < workers; ++k) threads_.emplace_back([this, k] { loop(k); });
    size_ = std::max(1, workers);
  }
  ~Pool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }
  void run(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (threads_.empty() || count < 64) {
      fn(0, count);
      return;
    }
    {
      std::lock_guard lock(mu_);
      fn_ = &fn;
      count_ = count;
      pending_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    cv_.notify_all();
    chunk(0, fn, count);
    std::unique_lock lock(mu_);
    done_.wait(lock, [this] { return pending_ == 0; });
  }

 private:
  void chunk(int k, const std::function<void(std::size_t, std::size_t)>& fn, std::size_t count) const {
    const std::size_t lo = count * static_cast<std::size_t>(k) / static_cast<std::size_t>(size_);
    const std::size_t hi = count * static_cast<std::size_t>(k + 1) / static_cast<std::size_t>(size_);
    fn(lo, hi);
  }
  void loop(int k) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, std::size_t)>* fn;
      std::size_t count;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        fn = fn_;
        count = count_;
      }
      chunk(k, *fn, count);
      {
        std::lock_guard lock(mu_);
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  std::vector<std::thread> threads_;
  int size_ = 1;
  std::mutex mu_;
  std::condition_variable cv_, done_;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  int pending_ = 0;
  const std::function<void(std::size_t, std::size_t)>* fn_ = nullptr;
  std::size_t count_ = 0;
};

Outcome apply_event(const Event& e, std::vector<Velocity>& v, const MajorantConfig& maj, const DsmcConfig& cfg) {
  Outcome out;
  if (!e.bath) {
    const Velocity q = v[e.i] - v[e.j];
    const double qn = q.norm();
    if (qn > maj.lambda_self) {
      out.violated = true;
      return out;
    }
    if (e.u * maj.lambda_self >= qn) return out;
    const double beta = cfg.params.transfer();
    const Velocity dv = beta * (qn * e.sigma - q);
    const double before = v[e.i].squaredNorm() + v[e.j].squaredNorm();
    const Velocity vi = v[e.i] + dv, vj = v[e.j] - dv;
    if ((vi - maj.centre).norm() > maj.radius_self || (vj - maj.centre).norm() > maj.radius_self) {
      out.violated = true;
      return out;
    }
    if (cfg.observer) cfg.observer({false, v[e.i], v[e.j], e.sigma, vi, vj});
    v[e.i] = vi;
    v[e.j] = vj;
    out.accepted = true;
    out.dE = vi.squaredNorm() + vj.squaredNorm() - before;
    return out;
  }
  const Velocity q = v[e.i] - e.w;
  const double qn = q.norm();
  if (qn > maj.lambda_bath) {
    out.violated = true;
    return out;
  }
  if (e.u * maj.lambda_bath >= qn) return out;
  const Velocity dv = 0.5 * (qn * e.sigma - q);
  const Velocity vi = v[e.i] + dv;
  if ((vi - maj.centre).norm() > maj.radius_self) {
    out.violated = true;
    return out;
  }
  if (cfg.observer) cfg.observer({true, v[e.i], e.w, e.sigma, vi, e.w - dv});
  v[e.i] = vi;
  out.accepted = true;
  return out;
}

}  // namespace

StepReport step(Ensemble& ens, double dt, const DsmcConfig& cfg) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const auto wall0 = std::chrono::steady_clock::now();
  const std::size_t N = ens.size();
  if (N < 2) throw std::invalid_argument("step: ensemble needs at least two particles");
  StepReport rep;
  if (!cfg.self_channel && !cfg.bath_channel) {
    ens.time += dt;
    ++ens.steps;
    return rep;
  }
  const int workers = cfg.observer ? 1 : std::max(1, cfg.workers);
  Pool pool(workers);

  MajorantConfig maj;
  maj.safety = cfg.safety;
  maj.refresh(ens.v, cfg.bath);
  const double per_particle = (cfg.self_channel ? maj.lambda_self : 0.0) + (cfg.bath_channel ? maj.lambda_bath : 0.0);
  rep.substeps = std::max(1, static_cast<int>(std::ceil(dt * per_particle / cfg.dt_ceiling - 1e-12)));
  const double h = dt / rep.substeps;

  std::vector<Event> plan;
  std::vector<Outcome> outcome;
  std::vector<std::uint32_t> mark(N, 0);
  std::vector<std::size_t> cuts;
  double dissipated = 0.0;

  for (int sub = 0; sub < rep.substeps; ++sub) {
    const std::vector<Velocity> snapshot = ens.v;
    const std::string rng_state = ens.rng.state();
    double safety = cfg.safety;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 40) throw NumericalFailure("step: majorant could not be certified");
      maj.safety = safety;
      maj.refresh(ens.v, cfg.bath);
      const double rate_self = cfg.self_channel ? 0.5 * static_cast<double>(N) * maj.lambda_self : 0.0;
      const double rate_bath = cfg.bath_channel ? static_cast<double>(N) * maj.lambda_bath : 0.0;
      const double total = rate_self + rate_bath;

      // Candidate plan: all random numbers are drawn here, in sequence.
      plan.clear();
      for (double t = ens.rng.exponential(total); t < h; t += ens.rng.exponential(total)) {
        Event e{};
        e.bath = ens.rng.uniform() * total >= rate_self;
        e.i = static_cast<std::uint32_t>(ens.rng.index(N));
        if (e.bath) {
          e.w = sample_bath_partner(cfg.bath, ens.rng);
        } else {
          e.j = static_cast<std::uint32_t>(ens.rng.index(N - 1));
          if (e.j >= e.i) ++e.j;
        }
        e.u = ens.rng.uniform();
        e.sigma = ens.rng.unit_vector();
        plan.push_back(e);
      }
      // Conflict-free batches in sequence order.
      cuts.assign(1, 0);
      std::uint32_t batch = 1;
      std::fill(mark.begin(), mark.end(), 0);
      for (std::size_t k = 0; k < plan.size(); ++k) {
        const Event& e = plan[k];
        if (mark[e.i] == batch || (!e.bath && mark[e.j] == batch)) {
          cuts.push_back(k);
          ++batch;
        }
        mark[e.i] = batch;
        if (!e.bath) mark[e.j] = batch;
      }
      cuts.push_back(plan.size());

      outcome.assign(plan.size(), Outcome{});
      bool violated = false;
      for (std::size_t b = 0; b + 1 < cuts.size() && !violated; ++b) {
        const std::size_t lo = cuts[b], count = cuts[b + 1] - cuts[b];
        std::atomic<bool> flag{false};
        pool.run(count, [&](std::size_t a, std::size_t z) {
          for (std::size_t k = lo + a; k < lo + z; ++k) {
            outcome[k] = apply_event(plan[k], ens.v, maj, cfg);
            if (outcome[k].violated) {
              flag.store(true, std::memory_order_relaxed);
              return;
            }
          }
        });
        violated = flag.load();
      }
      if (violated) {
        ++rep.majorant_violations;
        ens.v = snapshot;
        ens.rng.set_state(rng_state);
        safety *= 1.5;
        continue;
      }
      for (std::size_t k = 0; k < plan.size(); ++k) {
        const bool bath = plan[k].bath;
        (bath ? rep.proposed_bath : rep.proposed_self) += 1;
        if (outcome[k].accepted) {
          (bath ? rep.accepted_bath : rep.accepted_self) += 1;
          if (!bath) dissipated -= outcome[k].dE;
        }
      }
      break;
    }
  }
  const double Nd = static_cast<double>(N);
  rep.energy_dissipated = dissipated / Nd;
  rep.rate_self = static_cast<double>(rep.accepted_self) / (Nd * dt);
  rep.rate_bath = static_cast<double>(rep.accepted_bath) / (Nd * dt);
  auto low = [](std::uint64_t acc, std::uint64_t prop) {
    return prop > 1000 && static_cast<double>(acc) < 1e-3 * static_cast<double>(prop);
  };
  rep.low_acceptance = low(rep.accepted_self, rep.proposed_self) || low(rep.accepted_bath, rep.proposed_bath);
  ens.time += dt;
  ++ens.steps;
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rep;
}

std::uint64_t step_count(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("run: T and dt must be positive");
  const double n = std::round(T / dt);
  if (n < 1.0 || std::abs(n * dt - T) > 1e-9 * T)
    throw std::invalid_argument("run: T must be an integer multiple of dt");
  return static_cast<std::uint64_t>(n);
}

namespace {

void forensic_dump(const Ensemble& ens, const std::string& path) {
  nlohmann::json j;
  j["time"] = ens.time;
  j["step"] = ens.steps;
  j["seed"] = ens.seed;
  nlohmann::json bad = nlohmann::json::array();
  for (std::size_t k = 0; k < ens.v.size() && bad.size() < 100; ++k) {
    if (!ens.v[k].allFinite()) {
      bad.push_back({{"index", k},
                     {"v", {std::to_string(ens.v[k][0]), std::to_string(ens.v[k][1]), std::to_string(ens.v[k][2])}}});
    }
  }
  j["non_finite"] = bad;
  std::ofstream(path) << j.dump(2) << "\n";
}

}  // namespace

std::vector<StepReport> run(Ensemble& ens, const RunOptions& opts, const DsmcConfig& cfg) {
  const std::uint64_t n = step_count(opts.T_final, opts.dt);
  std::vector<StepReport> reports;
  reports.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    reports.push_back(step(ens, opts.dt, cfg));
    for (const auto& x : ens.v) {
      if (!x.allFinite()) {
        forensic_dump(ens, opts.forensic_path);
        throw NumericalFailure("non-finite velocity at step " + std::to_string(ens.steps) + "; dump written to " +
                               opts.forensic_path);
      }
    }
    for (const Hook& hook : opts.hooks)
      if (hook.every > 0 && ens.steps % hook.every == 0) hook.fn(ens, reports.back());
    if (opts.checkpoint_every > 0 && ens.steps % opts.checkpoint_every == 0 && !opts.checkpoint_path.empty())
      save_checkpoint(opts.checkpoint_path, ens, opts.config_hash);
  }
  return reports;
}

Moments moments(const Ensemble& ens, double p) {
  Moments m;
  m.p = p;
  for (const auto& x : ens.v) {
    m.momentum += x;
    const double s2 = x.squaredNorm();
    m.energy += s2;
    m.p_moment += std::pow(s2, 0.5 * p);
  }
  const double w = ens.weight();
  m.momentum *= w;
  m.energy *= w;
  m.p_moment *= w;
  return m;
}

ExpMoment exp_moment(const Ensemble& ens, double r, double s) {
  if (!(r >= 0.0) || !(s > 0.0 && s <= 2.0)) throw std::invalid_argument("exp_moment: need r >= 0 and s in (0, 2]");
  ExpMoment out;
  if (r == 0.0) return out;
  std::vector<double> e(ens.size());
  for (std::size_t k = 0; k < ens.size(); ++k) e[k] = r * std::pow(ens.v[k].norm(), s);
  const double top = *std::max_element(e.begin(), e.end());
  double acc = 0.0;
  for (double x : e) acc += std::exp(x - top);
  out.log_value = top + std::log(acc * ens.weight());
  out.value = std::exp(out.log_value);
  const std::size_t m = std::min<std::size_t>(10, e.size());
  std::partial_sort(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(m), e.end(), std::greater<>());
  double head = 0.0;
  for (std::size_t k = 0; k < m; ++k) head += std::exp(e[k] - top);
  out.top10_share = head / acc;
  out.unreliable = out.top10_share > 0.5;
  return out;
}

}  // namespace granbath
