// Copyright 2026 The granbath Authors
// SPDX-License-Identifier: Apache-2.0
#include "granbath/collision_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "granbath/manifest.hpp"
#include "granbath/quadrature.hpp"

namespace granbath {

namespace {

constexpr std::uint32_t kTensorVersion = 1;

// Column (i, j) of the tensor, dense over shells [k0, k1).
struct Column {
  std::size_t k0 = 0;
  std::vector<double> v;
};

Column build_column(std::size_t self, double r, double s, const std::vector<double>& E, double beta,
                    const Rule1D& rule, std::size_t pieces, double phi, double* escape) {
  // |v'|^2 is uniform on [(|c| - beta u)^2, (|c| + beta u)^2] given u = |v - w|,
  // |c|^2 = (1 - beta) r^2 + beta s^2 - beta (1 - beta) u^2; u has density u / (2 r s).
  const std::size_t n = E.size() - 1;
  std::vector<double> acc(n, 0.0);
  double outside = 0.0;
  std::size_t lo_k = n, hi_k = 0;
  const double ulo = std::abs(r - s), uhi = r + s;
  const double du = (uhi - ulo) / static_cast<double>(pieces);
  for (std::size_t p = 0; p < pieces; ++p) {
    const double a0 = ulo + du * static_cast<double>(p);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double u = a0 + 0.5 * du * (rule.nodes[q] + 1.0);
      const double wt = 0.5 * du * rule.weights[q] * u * u / (2.0 * r * s);
      const double c2 = std::max(0.0, (1.0 - beta) * r * r + beta * s * s - beta * (1.0 - beta) * u * u);
      const double c = std::sqrt(c2);
      const double ta = (c - beta * u) * (c - beta * u), tb = (c + beta * u) * (c + beta * u);
      const double len = tb - ta;
      if (!(len > 0.0)) {
        // degenerate: all mass at one speed
        const auto it = std::upper_bound(E.begin(), E.end(), ta);
        const std::size_t k = static_cast<std::size_t>(it - E.begin()) - 1;
        if (k < n) {
          acc[k] += wt;
          lo_k = std::min(lo_k, k);
          hi_k = std::max(hi_k, k);
        } else {
          outside += wt;
        }
        continue;
      }
      std::size_t k = static_cast<std::size_t>(std::upper_bound(E.begin(), E.end(), ta) - E.begin()) - 1;
      for (; k < n && E[k] < tb; ++k) {
        const double ov = std::min(tb, E[k + 1]) - std::max(ta, E[k]);
        if (ov > 0.0) {
          acc[k] += wt * ov / len;
          lo_k = std::min(lo_k, k);
          hi_k = std::max(hi_k, k);
        }
      }
      if (tb > E[n]) outside += wt * (tb - std::max(ta, E[n])) / len;
    }
  }
  // An outgoing speed beyond the grid is rejected: that particle stays in its shell.
  *escape = outside / phi;
  acc[self] += outside;
  lo_k = std::min(lo_k, self);
  hi_k = std::max(hi_k, self);
  Column col;
  col.k0 = lo_k;
  col.v.assign(acc.begin() + static_cast<std::ptrdiff_t>(lo_k), acc.begin() + static_cast<std::ptrdiff_t>(hi_k + 1));
  double total = 0.0;
  for (double x : col.v) total += x;
  // the rate integral is a polynomial in u, so this only removes rounding
  if (total > 0.0)
    for (double& x : col.v) x *= phi / total;
  return col;
}

}  // namespace

CollisionTensor CollisionTensor::build(const RadialGrid& grid, const RestitutionParams& params,
                                       const TensorOptions& opts) {
  CollisionTensor T;
  const std::size_t n = grid.size();
  T.n_ = n;
  T.alpha_ = params.alpha();
  T.grid_hash = grid.hash();
  T.phi_.resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) T.phi_[i * n + j] = shell_mean_speed(grid.r[i], grid.r[j]);
  std::vector<double> E(n + 1);
  for (std::size_t k = 0; k <= n; ++k) E[k] = grid.edges[k] * grid.edges[k];
  const Rule1D rule = gauss_legendre(opts.order);
  const double beta = params.transfer();

  std::vector<Column> cols(n * n);
  std::vector<double> escape(n * n, 0.0);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const std::size_t i = p / n, j = p % n;
      cols[p] = build_column(i, grid.r[i], grid.r[j], E, beta, rule, opts.pieces, T.phi_[p], &escape[p]);
    }
  };
  const int workers = std::max(1, opts.workers);
  if (workers == 1) {
    work(0, n * n);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back(work, n * n * static_cast<std::size_t>(t) / static_cast<std::size_t>(workers),
                        n * n * static_cast<std::size_t>(t + 1) / static_cast<std::size_t>(workers));
    for (auto& t : pool) t.join();
  }
  T.kstart_.resize(n * n);
  T.offset_.assign(n * n + 1, 0);
  for (std::size_t p = 0; p < n * n; ++p) {
    T.kstart_[p] = static_cast<std::uint32_t>(cols[p].k0);
    T.offset_[p + 1] = T.offset_[p] + cols[p].v.size();
    T.max_escape = std::max(T.max_escape, escape[p]);
  }
  T.values_.reserve(T.offset_.back());
  for (const auto& c : cols) T.values_.insert(T.values_.end(), c.v.begin(), c.v.end());
  return T;
}

double CollisionTensor::entry(std::size_t k, std::size_t i, std::size_t j) const {
  const std::size_t k0 = first(i, j), c = count(i, j);
  if (k < k0 || k >= k0 + c) return 0.0;
  return entries(i, j)[k - k0];
}

Eigen::VectorXd CollisionTensor::gain(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    if (a[static_cast<Eigen::Index>(i)] == 0.0) continue;
    for (std::size_t j = 0; j < n_; ++j) {
      const double coef = a[static_cast<Eigen::Index>(i)] * b[static_cast<Eigen::Index>(j)];
      if (coef == 0.0) continue;
      const std::size_t p = i * n_ + j;
      const double* e = values_.data() + offset_[p];
      const std::size_t k0 = kstart_[p], c = offset_[p + 1] - offset_[p];
      for (std::size_t t = 0; t < c; ++t) g[static_cast<Eigen::Index>(k0 + t)] += coef * e[t];
    }
  }
  return g;
}

Eigen::VectorXd CollisionTensor::loss(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_));
  for (std::size_t k = 0; k < n_; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j) acc += phi_[k * n_ + j] * b[static_cast<Eigen::Index>(j)];
    out[static_cast<Eigen::Index>(k)] = a[static_cast<Eigen::Index>(k)] * acc;
  }
  return out;
}

std::string CollisionTensor::checksum() const {
  std::string bytes(reinterpret_cast<const char*>(values_.data()), values_.size() * sizeof(double));
  bytes.append(reinterpret_cast<const char*>(kstart_.data()), kstart_.size() * sizeof(std::uint32_t));
  return fnv1a_hex(bytes);
}

void CollisionTensor::save(const std::string& path) const {
  nlohmann::json meta{{"version", kTensorVersion}, {"n", n_},          {"alpha", alpha_},
                      {"grid_hash", grid_hash},    {"checksum", checksum()}, {"max_escape", max_escape},
                      {"entries", values_.size()}};
  const std::string text = meta.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write tensor cache " + path);
  const std::uint64_t len = text.size();
  os.write("GBCT", 4);
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(text.data(), static_cast<std::streamsize>(len));
  os.write(reinterpret_cast<const char*>(phi_.data()), static_cast<std::streamsize>(phi_.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(kstart_.data()),
           static_cast<std::streamsize>(kstart_.size() * sizeof(std::uint32_t)));
  os.write(reinterpret_cast<const char*>(offset_.data()),
           static_cast<std::streamsize>(offset_.size() * sizeof(std::size_t)));
  os.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(values_.size() * sizeof(double)));
  if (!os) throw std::runtime_error("tensor cache write failed " + path);
}

CollisionTensor CollisionTensor::load(const std::string& path, const RadialGrid& grid, double alpha) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read tensor cache " + path);
  char magic[4];
  std::uint64_t len = 0;
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || std::memcmp(magic, "GBCT", 4) != 0 || len > (1u << 20)) throw std::runtime_error("not a tensor cache");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  const auto meta = nlohmann::json::parse(text);
  if (meta.at("version").get<std::uint32_t>() != kTensorVersion) throw std::runtime_error("tensor cache version");
  if (meta.at("grid_hash").get<std::string>() != grid.hash()) throw std::runtime_error("tensor cache grid mismatch");
  if (meta.at("alpha").get<double>() != alpha) throw std::runtime_error("tensor cache alpha mismatch");
  CollisionTensor T;
  T.n_ = meta.at("n").get<std::size_t>();
  T.alpha_ = alpha;
  T.grid_hash = grid.hash();
  T.max_escape = meta.at("max_escape").get<double>();
  T.phi_.resize(T.n_ * T.n_);
  T.kstart_.resize(T.n_ * T.n_);
  T.offset_.resize(T.n_ * T.n_ + 1);
  T.values_.resize(meta.at("entries").get<std::size_t>());
  is.read(reinterpret_cast<char*>(T.phi_.data()), static_cast<std::streamsize>(T.phi_.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(T.kstart_.data()),
          static_cast<std::streamsize>(T.kstart_.size() * sizeof(std::uint32_t)));
  is.read(reinterpret_cast<char*>(T.offset_.data()), static_cast<std::streamsize>(T.offset_.size() * sizeof(std::size_t)));
  is.read(reinterpret_cast<char*>(T.values_.data()), static_cast<std::streamsize>(T.values_.size() * sizeof(double)));
  if (!is) throw std::runtime_error("tensor cache truncated");
  if (T.checksum() != meta.at("checksum").get<std::string>()) throw std::runtime_error("tensor cache checksum mismatch");
  return T;
}

}  // namespace granbath
