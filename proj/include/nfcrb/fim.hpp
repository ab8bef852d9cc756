// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nfcrb/steering.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

namespace nfcrb {

// Power/noise bookkeeping. Either built from raw quantities, or from the SNR
// gamma = P|kappa|^2/(N0 B) and L = B T_p directly, in which case the raw
// fields hold normalised representatives (|kappa| = 1, P = gamma, N0 = B = 1).
struct NoiseAndPowerConfig {
    double snr_linear = 1.0;
    double time_bandwidth = 1.0;
    cd reflection_coeff{1.0, 0.0};
    double total_power = 1.0;
    double noise_psd = 1.0;
    double bandwidth = 1.0;

    static NoiseAndPowerConfig from_snr(double gamma, double L, double kappa_phase = 0.0)
    {
        NoiseAndPowerConfig cfg;
        cfg.snr_linear = gamma;
        cfg.time_bandwidth = L;
        cfg.reflection_coeff = std::polar(1.0, kappa_phase);
        cfg.total_power = gamma;
        cfg.noise_psd = 1.0;
        cfg.bandwidth = 1.0;
        cfg.validate();
        return cfg;
    }

    static NoiseAndPowerConfig from_snr_db(double gamma_db, double L, double kappa_phase = 0.0)
    {
        return from_snr(db_to_linear(gamma_db), L, kappa_phase);
    }

    // noise_psd = 0 is accepted for noiseless simulation; gamma is then +inf.
    static NoiseAndPowerConfig from_physical(double power, cd kappa, double noise_psd, double bandwidth,
                                             double cpi_duration)
    {
        if (!(bandwidth > 0.0) || !(cpi_duration > 0.0)) throw DomainError("bandwidth and CPI must be positive");
        if (!(noise_psd >= 0.0)) throw DomainError("noise PSD must be >= 0");
        NoiseAndPowerConfig cfg;
        cfg.total_power = power;
        cfg.reflection_coeff = kappa;
        cfg.noise_psd = noise_psd;
        cfg.bandwidth = bandwidth;
        cfg.time_bandwidth = bandwidth * cpi_duration;
        cfg.snr_linear = noise_psd > 0.0 ? power * std::norm(kappa) / (noise_psd * bandwidth) : inf;
        cfg.validate();
        return cfg;
    }

    double cpi_duration() const { return time_bandwidth / bandwidth; }
    double snr_db() const { return linear_to_db(snr_linear); }

    // |rho / kappa|: MIMO splits P over M waveforms, the phased array adds M
    // coherently.
    double amplitude_scale(Mode mode, int M) const
    {
        double tp_p = cpi_duration() * total_power;
        return mode == Mode::MIMO ? std::sqrt(tp_p / M) : std::sqrt(tp_p * M);
    }

    cd rho(Mode mode, int M) const { return reflection_coeff * amplitude_scale(mode, M); }

    void validate() const
    {
        if (!(snr_linear > 0.0)) throw DomainError("SNR must be positive");
        if (!(time_bandwidth >= 1.0)) throw DomainError("time-bandwidth product L must be >= 1");
        if (!(total_power > 0.0)) throw DomainError("transmit power must be positive");
        if (!(noise_psd >= 0.0)) throw DomainError("noise PSD must be >= 0");
        if (!(bandwidth > 0.0)) throw DomainError("bandwidth must be positive");
        if (std::abs(reflection_coeff) == 0.0) throw DomainError("reflection coefficient must be non-zero");
    }
};

// Ordering (theta, r, kappa_r, kappa_i).
struct FimMatrix {
    std::array<std::array<real_ext, 4>, 4> entries{};
    // (theta, r) block with kappa projected out, {q11, q22, q12}. Filled by
    // fim_numeric from centred sums: in the far field the range information
    // is ~1e-14 of the raw entries, below what the Schur complement of
    // `entries` can resolve even in long double.
    std::optional<std::array<real_ext, 3>> projected;

    real_ext operator()(int i, int j) const { return entries[i][j]; }
};

struct CrbResult {
    double crb_theta = inf;
    double crb_range = inf;
    bool identifiable = false;
    Method method = Method::NumericalFim;
    WarningSet warnings = warn_none;

    static CrbResult unidentifiable(Method m, WarningSet w = warn_none) { return {inf, inf, false, m, w}; }
};

inline constexpr real_ext identifiability_tol = 1e-12L;

// Inverts the 2x2 (theta, r) information block [[q11, q12], [q12, q22]]
// and scales by `factor`. Singular or indefinite blocks are unidentifiable.
inline CrbResult crb_from_information(real_ext q11, real_ext q22, real_ext q12, real_ext factor, Method method)
{
    real_ext det = q11 * q22 - q12 * q12;
    if (!(q11 > 0) || !(q22 > 0) || !(det > identifiability_tol * q11 * q22)) return CrbResult::unidentifiable(method);
    CrbResult out;
    out.crb_theta = static_cast<double>(factor * q22 / det);
    out.crb_range = static_cast<double>(factor * q11 / det);
    out.identifiable = std::isfinite(out.crb_theta) && std::isfinite(out.crb_range);
    out.method = method;
    if (!out.identifiable) return CrbResult::unidentifiable(method);
    return out;
}

inline FimMatrix fim_numeric(const ObservationVector& obs, const NoiseAndPowerConfig& cfg, Mode mode)
{
    cfg.validate();
    const std::size_t n = obs.length();
    if (obs.g_theta.size() != n || obs.g_range.size() != n) throw DomainError("observation derivative length mismatch");

    // Gram matrix of (g_theta, g_range, g) in extended precision. Each
    // derivative is written as u * g and the sums are weighted by |g|^2, so
    // the rounding in |g_i| is shared by every entry.
    cx_ext G_tt = 0, G_tr = 0, G_rr = 0, G_tg = 0, G_rg = 0, G_gg = 0;
    std::vector<cx_ext> ut(n), ur(n);
    std::vector<real_ext> w(n);
    bool has_zero = false;
    for (std::size_t i = 0; i < n; ++i) {
        cx_ext gt(obs.g_theta[i].real(), obs.g_theta[i].imag());
        cx_ext gr(obs.g_range[i].real(), obs.g_range[i].imag());
        cx_ext g(obs.g[i].real(), obs.g[i].imag());
        w[i] = std::norm(g);
        if (w[i] == 0) {
            has_zero = true;
            G_tt += std::norm(gt);
            G_tr += std::conj(gt) * gr;
            G_rr += std::norm(gr);
            continue;
        }
        ut[i] = gt / g;
        ur[i] = gr / g;
        G_tt += w[i] * std::norm(ut[i]);
        G_tr += w[i] * (std::conj(ut[i]) * ur[i]);
        G_rr += w[i] * std::norm(ur[i]);
        G_tg += w[i] * std::conj(ut[i]);
        G_rg += w[i] * std::conj(ur[i]);
        G_gg += w[i];
    }

    const real_ext two_over_n0 = 2.0L / static_cast<real_ext>(cfg.noise_psd);
    const cd rho_d = cfg.rho(mode, obs.num_tx);
    const cx_ext rho(rho_d.real(), rho_d.imag());
    const real_ext scale = cfg.amplitude_scale(mode, obs.num_tx);   // d w / d kappa_r
    const real_ext rho2 = std::norm(rho);
    const cx_ext j(0, 1);

    FimMatrix F;
    auto& E = F.entries;
    E[0][0] = two_over_n0 * rho2 * G_tt.real();
    E[0][1] = two_over_n0 * rho2 * G_tr.real();
    E[1][1] = two_over_n0 * rho2 * G_rr.real();
    E[0][2] = two_over_n0 * (std::conj(rho) * scale * G_tg).real();
    E[0][3] = two_over_n0 * (std::conj(rho) * scale * j * G_tg).real();
    E[1][2] = two_over_n0 * (std::conj(rho) * scale * G_rg).real();
    E[1][3] = two_over_n0 * (std::conj(rho) * scale * j * G_rg).real();
    E[2][2] = two_over_n0 * scale * scale * G_gg.real();
    E[3][3] = E[2][2];
    E[2][3] = two_over_n0 * scale * scale * (j * G_gg).real();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < r; ++c) E[r][c] = E[c][r];

    if (!has_zero && G_gg.real() > 0) {
        // Second pass about the weighted means of u.
        const cx_ext mt = std::conj(G_tg) / G_gg.real(), mr = std::conj(G_rg) / G_gg.real();
        real_ext p11 = 0, p22 = 0, p12 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            cx_ext dt = ut[i] - mt, dr = ur[i] - mr;
            p11 += w[i] * std::norm(dt);
            p22 += w[i] * std::norm(dr);
            p12 += w[i] * (std::conj(dt) * dr).real();
        }
        const real_ext k = two_over_n0 * rho2;
        F.projected = std::array<real_ext, 3>{k * p11, k * p22, k * p12};
    }
    return F;
}

// Schur complement of the nuisance (kappa) block, then the 2x2 inverse.
inline CrbResult crb_from_fim(const FimMatrix& F)
{
    if (F.projected) {
        const auto& q = *F.projected;
        return crb_from_information(q[0], q[1], q[2], 1.0L, Method::NumericalFim);
    }
    const auto& E = F.entries;
    real_ext det22 = E[2][2] * E[3][3] - E[2][3] * E[3][2];
    if (!(det22 > identifiability_tol * E[2][2] * E[3][3])) return CrbResult::unidentifiable(Method::NumericalFim);
    // inv(Pi22) by cofactors
    real_ext i00 = E[3][3] / det22, i11 = E[2][2] / det22, i01 = -E[2][3] / det22;
    auto proj = [&](int a, int b) {
        real_ext xa0 = E[a][2], xa1 = E[a][3], xb0 = E[b][2], xb1 = E[b][3];
        return xa0 * (i00 * xb0 + i01 * xb1) + xa1 * (i01 * xb0 + i11 * xb1);
    };
    real_ext q11 = E[0][0] - proj(0, 0);
    real_ext q22 = E[1][1] - proj(1, 1);
    real_ext q12 = E[0][1] - proj(0, 1);
    return crb_from_information(q11, q22, q12, 1.0L, Method::NumericalFim);
}

inline CrbResult crb_numerical_fim(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                   const NoiseAndPowerConfig& cfg, Mode mode, Topology topology)
{
    CrbResult out = crb_from_fim(fim_numeric(build_observation(geom, tgt, carrier, mode, topology), cfg, mode));
    out.warnings |= geometry_warnings(geom, tgt);
    return out;
}

// ---------------------------------------------------------------------------
// Intermediate sums and the bound algebra shared by the exact-sum and the
// closed-form paths.

struct IntermediateParams {
    real_ext a = 0, e = 0, p = 0;
    cx_ext c{}, q{};
    bool has_rx = false;
    real_ext i_rx = 0, s_rx = 0, k_rx = 0;
    cx_ext f_rx{}, h_rx{};
    // Centred forms a - |c|^2/M, p - |q|^2/M, e - Re(c* q)/M and the receive
    // counterparts. The bound algebra reads these; the exact sums fill them
    // by a second pass about the mean instead of by subtraction.
    real_ext var_a = 0, var_p = 0, cov_e = 0;
    real_ext var_i = 0, var_s = 0, cov_k = 0;
};

inline void center_by_subtraction(IntermediateParams& ip, int M, int N)
{
    ip.var_a = ip.a - std::norm(ip.c) / M;
    ip.var_p = ip.p - std::norm(ip.q) / M;
    ip.cov_e = ip.e - (std::conj(ip.c) * ip.q).real() / M;
    if (ip.has_rx) {
        ip.var_i = ip.i_rx - std::norm(ip.f_rx) / N;
        ip.var_s = ip.s_rx - std::norm(ip.h_rx) / N;
        ip.cov_k = ip.k_rx - (std::conj(ip.f_rx) * ip.h_rx).real() / N;
    }
}

// Monostatic MIMO (g = a kron a). Information (2/(M pref)) [[X, Z], [Z, Y]]
// with X = M a - |c|^2 and so on.
inline CrbResult bound_mono_mimo(const IntermediateParams& ip, int M, const NoiseAndPowerConfig& cfg, Method method)
{
    const real_ext Mr = M;
    real_ext pref = 1.0L / (2.0L * cfg.snr_linear * cfg.time_bandwidth);
    return crb_from_information(Mr * ip.var_a, Mr * ip.var_p, Mr * ip.cov_e, pref * Mr / 2.0L, method);
}

// Monostatic phased (g = a).
inline CrbResult bound_mono_phased(const IntermediateParams& ip, int M, const NoiseAndPowerConfig& cfg, Method method)
{
    const real_ext Mr = M;
    real_ext pref = 1.0L / (2.0L * cfg.snr_linear * cfg.time_bandwidth);
    return crb_from_information(Mr * ip.var_a, Mr * ip.var_p, Mr * ip.cov_e, pref, method);
}

// Bistatic MIMO (g = b kron a). With the far-field receive array f = h = 0
// and X = M i + N a - (N/M)|c|^2.
inline CrbResult bound_bistatic_mimo(const IntermediateParams& ip, int M, int N, const NoiseAndPowerConfig& cfg,
                                       Method method)
{
    const real_ext Mr = M, Nr = N;
    real_ext X = Mr * ip.var_i + Nr * ip.var_a;
    real_ext Y = Mr * ip.var_s + Nr * ip.var_p;
    real_ext Z = Mr * ip.cov_k + Nr * ip.cov_e;
    real_ext pref = 1.0L / (2.0L * cfg.snr_linear * cfg.time_bandwidth);
    return crb_from_information(X, Y, Z, pref * Mr, method);
}

// Bistatic phased: g = b only, so the (theta, r) information is rank one.
inline CrbResult bound_bistatic_phased(const IntermediateParams& ip, int M, int N, const NoiseAndPowerConfig& cfg,
                                         Method method)
{
    (void)N;
    real_ext pref = 1.0L / (2.0L * cfg.snr_linear * cfg.time_bandwidth * M);
    return crb_from_information(ip.var_i, ip.var_s, ip.cov_k, pref, method);
}

inline CrbResult bound_from_intermediates(const IntermediateParams& ip, const ArrayGeometry& geom, const NoiseAndPowerConfig& cfg,
                             Mode mode, Topology topology, Method method)
{
    if (topology == Topology::Monostatic)
        return mode == Mode::MIMO ? bound_mono_mimo(ip, geom.num_tx, cfg, method)
                                  : bound_mono_phased(ip, geom.num_tx, cfg, method);
    return mode == Mode::MIMO ? bound_bistatic_mimo(ip, geom.num_tx, geom.num_rx, cfg, method)
                              : bound_bistatic_phased(ip, geom.num_tx, geom.num_rx, cfg, method);
}

namespace detail {

inline cx_ext widen(cd z) { return {z.real(), z.imag()}; }

} // namespace detail

namespace detail {

struct CentredSums {
    real_ext a = 0, p = 0, e = 0;
    cx_ext c{}, q{};
    real_ext var_a = 0, var_p = 0, cov_e = 0;
};

// Sums over the log-derivatives d/v of one steering vector. Using d/v keeps
// |v| = 1 exact, which the bound algebra assumes when it uses M for
// ||a||^2.
inline CentredSums log_derivative_sums(const SteeringVector& sv)
{
    const std::size_t n = sv.length();
    std::vector<cx_ext> ut(n), ur(n);
    CentredSums out;
    for (std::size_t i = 0; i < n; ++i) {
        cx_ext v = widen(sv.values[i]);
        ut[i] = widen(sv.d_theta[i]) / v;
        ur[i] = widen(sv.d_range[i]) / v;
        out.a += std::norm(ut[i]);
        out.p += std::norm(ur[i]);
        out.e += (std::conj(ut[i]) * ur[i]).real();
        out.c += std::conj(ut[i]);
        out.q += std::conj(ur[i]);
    }
    const cx_ext mt = std::conj(out.c) / static_cast<real_ext>(n), mr = std::conj(out.q) / static_cast<real_ext>(n);
    for (std::size_t i = 0; i < n; ++i) {
        cx_ext dt = ut[i] - mt, dr = ur[i] - mr;
        out.var_a += std::norm(dt);
        out.var_p += std::norm(dr);
        out.cov_e += (std::conj(dt) * dr).real();
    }
    return out;
}

} // namespace detail

// Intermediates by direct summation over the element responses.
inline IntermediateParams intermediates_exact(const ArrayGeometry& geom, const TargetLocation& tgt,
                                              const CarrierConfig& carrier)
{
    IntermediateParams ip;
    auto tx = detail::log_derivative_sums(tx_steering(geom, tgt, carrier));
    ip.a = tx.a;
    ip.p = tx.p;
    ip.e = tx.e;
    ip.c = tx.c;
    ip.q = tx.q;
    ip.var_a = tx.var_a;
    ip.var_p = tx.var_p;
    ip.cov_e = tx.cov_e;
    if (geom.array_separation > 0.0) {
        auto rx = detail::log_derivative_sums(rx_steering_far(geom, tgt, carrier));
        ip.has_rx = true;
        ip.i_rx = rx.a;
        ip.s_rx = rx.p;
        ip.k_rx = rx.e;
        ip.f_rx = rx.c;
        ip.h_rx = rx.q;
        ip.var_i = rx.var_a;
        ip.var_s = rx.var_p;
        ip.cov_k = rx.cov_e;
    }
    return ip;
}

inline CrbResult crb_exact_sum(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                               const NoiseAndPowerConfig& cfg, Mode mode, Topology topology)
{
    detail::check_topology(geom, topology);
    cfg.validate();
    CrbResult out = bound_from_intermediates(intermediates_exact(geom, tgt, carrier), geom, cfg, mode, topology, Method::ExactSumQ);
    out.warnings |= geometry_warnings(geom, tgt);
    return out;
}

} // namespace nfcrb
