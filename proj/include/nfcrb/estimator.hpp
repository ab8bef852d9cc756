// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nfcrb/closedform.hpp"
#include "nfcrb/signalsim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace nfcrb {

struct GridSpec {
    double theta_min = -pi / 3;
    double theta_max = pi / 3;
    int theta_points = 61;
    double range_min = 1.0;
    double range_max = 20.0;
    int range_points = 39;
    int refine_levels = 0;

    double theta_step() const { return (theta_max - theta_min) / (theta_points - 1); }
    double range_step() const { return (range_max - range_min) / (range_points - 1); }
    double theta_at(int i) const { return theta_min + i * theta_step(); }
    double range_at(int j) const { return range_min + j * range_step(); }

    bool strictly_contains(double theta, double range) const
    {
        return theta > theta_min && theta < theta_max && range > range_min && range < range_max;
    }

    void validate() const
    {
        if (!(theta_min < theta_max) || !(range_min < range_max)) throw DomainError("grid ranges must be ordered");
        if (theta_points < 2 || range_points < 2) throw DomainError("grid needs at least 2 points per axis");
        if (refine_levels < 0) throw DomainError("refine_levels must be >= 0");
        if (!(range_min > 0.0)) throw DomainError("grid ranges must be positive");
    }
};

struct Estimate {
    double theta = 0.0;
    double range = 0.0;
    double statistic = 0.0;
    // Set when the coarse search finds several equal maxima, or when theta and
    // r cannot be told apart to first order at the estimate.
    bool ambiguous = false;
};

inline constexpr double tie_tolerance = 1e-12;

namespace detail {

// Scan order is theta-major, then range, both ascending; a later point only
// wins if it beats the incumbent by more than the relative tie tolerance, so
// ties go to the smallest theta, then the smallest range.
struct ArgMax {
    double theta = 0.0, range = 0.0, value = -inf;
    int ties = 0;

    void offer(double t, double r, double v)
    {
        if (std::isnan(v)) return;
        double tol = value == -inf ? 0.0 : tie_tolerance * std::abs(value);
        if (v > value + tol) {
            theta = t;
            range = r;
            value = v;
            ties = 0;
        } else if (std::abs(v - value) <= tol) {
            ++ties;
        }
    }
};

} // namespace detail

// Coarse scan, then `refine_levels` passes that halve both steps and rescan a
// 5 x 5 neighbourhood of the incumbent (clipped to the grid box).
template <class Statistic>
Estimate grid_search(const GridSpec& grid, Statistic&& stat)
{
    grid.validate();
    detail::ArgMax best;
    for (int i = 0; i < grid.theta_points; ++i)
        for (int j = 0; j < grid.range_points; ++j) {
            double t = grid.theta_at(i), r = grid.range_at(j);
            best.offer(t, r, stat(t, r));
        }
    const bool coarse_tie = best.ties > 0;

    double dt = grid.theta_step(), dr = grid.range_step();
    for (int level = 0; level < grid.refine_levels; ++level) {
        dt *= 0.5;
        dr *= 0.5;
        detail::ArgMax local;
        const double t0 = best.theta, r0 = best.range;
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j) {
                double t = t0 + i * dt, r = r0 + j * dr;
                if (t < grid.theta_min || t > grid.theta_max || r < grid.range_min || r > grid.range_max) continue;
                local.offer(t, r, (i == 0 && j == 0) ? best.value : stat(t, r));
            }
        best.theta = local.theta;
        best.range = local.range;
        best.value = local.value;
    }
    return {best.theta, best.range, best.value, coarse_tie};
}

// 1 - (correlation between the kappa-projected theta and r derivatives)^2.
// Zero means the two parameters move the response along the same direction.
inline double local_separability(const SteeringModel& model, double theta, double range)
{
    ObservationVector obs = model.observe(theta, range);
    FimMatrix F = fim_numeric(obs, NoiseAndPowerConfig::from_snr(1.0, 1.0), model.mode);
    if (!F.projected) return 0.0;
    const auto& q = *F.projected;
    if (!(q[0] > 0) || !(q[1] > 0)) return 0.0;
    return static_cast<double>(1.0L - q[2] * q[2] / (q[0] * q[1]));
}

inline constexpr double ambiguity_threshold = 1e-9;

// Single-snapshot matched-field statistic |g^H y|^2 / ||g||^2.
inline Estimate matched_field_ml(const Snapshot& snap, const SteeringModel& model, const GridSpec& grid)
{
    if (snap.y.size() != model.length()) throw DomainError("snapshot length does not match the observation model");
    SteeringModel local = model;
    std::vector<cd> g;
    auto stat = [&](double t, double r) {
        local.values(t, r, g);
        cd acc = 0;
        double nrm = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            acc += std::conj(g[i]) * snap.y[i];
            nrm += std::norm(g[i]);
        }
        return std::norm(acc) / nrm;
    };
    Estimate est = grid_search(grid, stat);
    if (!est.ambiguous) {
        try {
            est.ambiguous = local_separability(local, est.theta, est.range) <= ambiguity_threshold;
        } catch (const std::exception&) {
            // estimate sits on a degenerate point of the geometry
            est.ambiguous = true;
        }
    }
    return est;
}

struct CaponResult {
    std::vector<double> theta_axis;
    std::vector<double> range_axis;
    std::vector<double> spectrum;   // coarse grid, theta-major
    Estimate estimate;
};

// P(theta, r) = 1 / (g^H Rinv g) with the loaded sample covariance
// R = (1/S) sum y y^H + loading (tr R / dim) I.
inline CaponResult capon_spectrum(const std::vector<Snapshot>& snapshots, const SteeringModel& model,
                                  const GridSpec& grid, double loading)
{
    if (snapshots.size() < 2) throw DomainError("Capon needs at least 2 snapshots");
    if (!(loading >= 0.0)) throw DomainError("diagonal loading must be >= 0");
    grid.validate();
    const Eigen::Index dim = static_cast<Eigen::Index>(model.length());
    Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& s : snapshots) {
        if (static_cast<Eigen::Index>(s.y.size()) != dim) throw DomainError("snapshot length mismatch");
        Eigen::Map<const Eigen::VectorXcd> y(s.y.data(), dim);
        R.selfadjointView<Eigen::Lower>().rankUpdate(y);
    }
    R = R.selfadjointView<Eigen::Lower>();
    R /= static_cast<double>(snapshots.size());
    const double tr = R.trace().real();
    R.diagonal().array() += loading * tr / dim;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(R);
    if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed; increase loading");
    const Eigen::VectorXd& ev = eig.eigenvalues();
    if (!(ev.minCoeff() > 1e-12 * ev.maxCoeff()))
        throw NumericalError("sample covariance is singular (min/max eigenvalue " +
                             std::to_string(ev.minCoeff() / ev.maxCoeff()) + ", " +
                             std::to_string(snapshots.size()) + " snapshots for dimension " + std::to_string(dim) +
                             "); increase loading");
    const Eigen::MatrixXcd Rinv = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().adjoint();

    SteeringModel local = model;
    std::vector<cd> g;
    auto power = [&](double t, double r) {
        local.values(t, r, g);
        Eigen::Map<const Eigen::VectorXcd> gv(g.data(), dim);
        return 1.0 / (gv.adjoint() * Rinv * gv).value().real();
    };

    CaponResult out;
    for (int i = 0; i < grid.theta_points; ++i) out.theta_axis.push_back(grid.theta_at(i));
    for (int j = 0; j < grid.range_points; ++j) out.range_axis.push_back(grid.range_at(j));
    out.spectrum.reserve(out.theta_axis.size() * out.range_axis.size());
    for (double t : out.theta_axis)
        for (double r : out.range_axis) out.spectrum.push_back(power(t, r));
    out.estimate = grid_search(grid, power);
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

enum class Estimator { Capon, MatchedFieldML };

inline std::string_view to_string(Estimator e) { return e == Estimator::Capon ? "Capon" : "MatchedFieldML"; }

struct RmseReport {
    double rmse_theta = 0.0;
    double rmse_range = 0.0;
    int trials = 0;
    double snr_db = 0.0;
    double crb_theta = inf;
    double crb_range = inf;
    Estimator estimator = Estimator::MatchedFieldML;
    std::uint64_t master_seed = 0;
    int ambiguous_trials = 0;
};

struct Scenario {
    ArrayGeometry geom;
    TargetLocation target;
    CarrierConfig carrier;
    Mode mode = Mode::MIMO;
    Topology topology = Topology::Monostatic;

    SteeringModel model() const
    {
        SteeringModel m;
        m.geom = geom;
        m.carrier = carrier;
        m.mode = mode;
        m.topology = topology;
        return m;
    }
};

struct MonteCarloOptions {
    int capon_snapshots = 64;
    double capon_loading = 1e-3;
    unsigned threads = 0;   // 0: hardware concurrency
};

// Runs fn(i) for i in [0, count) on a small thread pool. Callers write into
// slot i of a preallocated buffer, so the output order never depends on the
// schedule.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, unsigned threads = 0)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                if (failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// The reported CRB is the closed-form bound for one snapshot; Capon sees S
// independent snapshots, so its bound is divided by S.
inline RmseReport monte_carlo_rmse(const Scenario& sc, const NoiseAndPowerConfig& cfg, Estimator estimator,
                                   const GridSpec& grid, int K, std::uint64_t master_seed,
                                   const MonteCarloOptions& opt = {})
{
    if (K < 1) throw DomainError("K must be >= 1");
    grid.validate();
    if (!grid.strictly_contains(sc.target.angle, sc.target.range))
        throw DomainError("true (theta, r) must lie strictly inside the search grid");
    cfg.validate();

    const ObservationVector truth = build_observation(sc.geom, sc.target, sc.carrier, sc.mode, sc.topology);
    const SteeringModel model = sc.model();
    std::vector<Estimate> est(K);
    parallel_for(
        static_cast<std::size_t>(K),
        [&](std::size_t k) {
            const std::uint64_t seed = substream_seed(master_seed, k);
            if (estimator == Estimator::MatchedFieldML) {
                est[k] = matched_field_ml(synth_snapshot(truth, cfg, seed, sc.target.angle, sc.target.range), model, grid);
            } else {
                std::vector<Snapshot> snaps;
                for (int s = 0; s < opt.capon_snapshots; ++s)
                    snaps.push_back(synth_snapshot(truth, cfg, substream_seed(seed, s), sc.target.angle, sc.target.range));
                est[k] = capon_spectrum(snaps, model, grid, opt.capon_loading).estimate;
            }
        },
        opt.threads);

    RmseReport rep;
    long double st = 0, sr = 0;
    for (const auto& e : est) {
        st += static_cast<long double>(e.theta - sc.target.angle) * (e.theta - sc.target.angle);
        sr += static_cast<long double>(e.range - sc.target.range) * (e.range - sc.target.range);
        rep.ambiguous_trials += e.ambiguous ? 1 : 0;
    }
    rep.rmse_theta = static_cast<double>(std::sqrt(st / K));
    rep.rmse_range = static_cast<double>(std::sqrt(sr / K));
    rep.trials = K;
    rep.snr_db = cfg.snr_db();
    rep.estimator = estimator;
    rep.master_seed = master_seed;

    CrbResult crb = crb_closed_form(sc.geom, sc.target, sc.carrier, cfg, sc.mode, sc.topology);
    const double per_snapshot = estimator == Estimator::Capon ? 1.0 / opt.capon_snapshots : 1.0;
    rep.crb_theta = crb.crb_theta * per_snapshot;
    rep.crb_range = crb.crb_range * per_snapshot;
    return rep;
}

// Search box of +-half_width standard deviations around the truth, with a
// step of sigma/cells_per_sigma, clipped to +-max_angle and to a fraction of
// the range. Suited to harness runs where the bound is known in advance.
inline GridSpec crb_scaled_grid(const TargetLocation& truth, const CrbResult& crb, double half_width = 6.0,
                                double cells_per_sigma = 2.0, int refine_levels = 3, double max_angle = 10.0 * pi / 180,
                                double max_range_fraction = 0.5)
{
    if (!crb.identifiable) throw DomainError("CRB-scaled grid needs an identifiable scenario");
    auto axis = [&](double centre, double sigma, double cap, double lo_limit, double hi_limit, double& lo, double& hi,
                    int& pts) {
        double half = std::min(half_width * sigma, cap);
        int n = static_cast<int>(std::ceil(2.0 * half / (sigma / cells_per_sigma)));
        n = std::clamp(n, 4, 200);
        if (n % 2) ++n;
        lo = std::max(centre - half, lo_limit);
        hi = std::min(centre + half, hi_limit);
        pts = n + 1;
    };
    GridSpec g;
    g.refine_levels = refine_levels;
    axis(truth.angle, std::sqrt(crb.crb_theta), max_angle, -pi / 2, pi / 2, g.theta_min, g.theta_max, g.theta_points);
    axis(truth.range, std::sqrt(crb.crb_range), max_range_fraction * truth.range, 1e-6, inf, g.range_min,
         g.range_max, g.range_points);
    // shift by a fraction of a cell so the truth is not a lattice point
    g.theta_min += 0.37 * g.theta_step();
    g.theta_max += 0.37 * g.theta_step();
    g.range_min += 0.37 * g.range_step();
    g.range_max += 0.37 * g.range_step();
    return g;
}

} // namespace nfcrb
