// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nfcrb/fim.hpp"

#include <cmath>

namespace nfcrb {

inline double xi_correction(double theta)
{
    double s2 = std::sin(theta) * std::sin(theta);
    double c = std::cos(theta), c2 = c * c;
    return (6.0 * s2 + c2 * std::cos(2.0 * theta)) / (9.0 * s2 + c2 * c2 * c2);
}

namespace detail {

inline void check_closed_form_domain(const ArrayGeometry& geom, const TargetLocation& tgt,
                                     const CarrierConfig& carrier)
{
    geom.validate();
    tgt.validate();
    carrier.validate();
    if (std::abs(tgt.angle) == pi / 2) throw SingularGeometryError("closed forms need |theta| < pi/2");
    if (!(eps_tx(geom, tgt) < 1.0)) throw DomainError("d_T / r must be < 1 for closed forms");
}

} // namespace detail

// Integral (continuous-aperture) approximations of the transmit sums, with
// D_T = M d_T. The brackets are rearranged so that nothing cancels at small
// x = D_T/r: the span uses a single atan2, the log ratio uses log1p, the
// square-root difference is rationalised and psi is computed as a log1p of
// a ratio whose numerator and denominator are both sums of positive terms.
inline IntermediateParams intermediates_closed(const ArrayGeometry& geom, const TargetLocation& tgt,
                                               const CarrierConfig& carrier)
{
    detail::check_closed_form_domain(geom, tgt, carrier);
    using T = real_ext;
    const T k = 2.0L * std::numbers::pi_v<T> / static_cast<T>(carrier.wavelength());
    IntermediateParams ip;

    if (geom.num_tx == 1) {
        // One element: the sums have a single m = 0 term.
        ip.p = k * k;
        ip.q = cx_ext(0, k);
    } else {
        const T r = tgt.range, th = tgt.angle;
        const T eps = static_cast<T>(geom.tx_spacing) / r;
        const T x = static_cast<T>(geom.num_tx) * eps;
        const T s = std::sin(th), c = std::cos(th);
        const T cos2 = std::cos(2.0L * th), sin2 = std::sin(2.0L * th);

        const T A = 1.0L - x * s + 0.25L * x * x;
        const T B = 1.0L + x * s + 0.25L * x * x;
        const T sum_roots = std::sqrt(A) + std::sqrt(B);
        const T span = std::atan2(x * c, 1.0L - 0.25L * x * x);
        const T g3 = std::log1p(-2.0L * x * s / B);
        const T g1 = -2.0L * x * s / sum_roots;
        // psi is even in theta
        const T sa = std::abs(s);
        const T psi = std::log1p((x + 2.0L * x * sa / sum_roots) / (std::sqrt(1.0L - x * sa + 0.25L * x * x) + sa - 0.5L * x));

        ip.a = k * k * r * r * c * c / eps * (x + s * g3 - cos2 / c * span);
        ip.c = cx_ext(0, -k * r * c / eps * (g1 + psi * s));
        ip.e = k * k * r * c / eps * (x * s - 0.5L * cos2 * g3 - span * sin2);
        ip.p = k * k / eps * (s * s * x - g3 * c * c * s + span * c * cos2);
        ip.q = cx_ext(0, k / eps * (psi * c * c - s * g1));
    }

    if (geom.array_separation > 0.0) {
        auto grad = receive_sine_gradient(geom, tgt);
        const T N = geom.num_rx, dR = geom.rx_spacing;
        const T base = k * k * dR * dR * N * (N * N - 1.0L) / 12.0L;
        const T gt = grad.gamma_theta, gr = grad.gamma_range;
        ip.has_rx = true;
        ip.i_rx = base * gt * gt;
        ip.s_rx = base * gr * gr;
        ip.k_rx = base * gt * gr;
    }
    center_by_subtraction(ip, geom.num_tx, geom.num_rx);
    return ip;
}

namespace detail {

// The centred range sums are differences of O(1) terms that agree to
// O((D_T/r)^4), so below D_T/r ~ 2e-3 the range bound keeps only a few
// digits. The exact-sum path has no such loss.
inline constexpr double closed_form_min_aperture_ratio = 2e-3;

inline CrbResult closed_form_result(CrbResult res, const ArrayGeometry& geom, const TargetLocation& tgt)
{
    res.warnings |= geometry_warnings(geom, tgt);
    if (geom.tx_aperture() / tgt.range < closed_form_min_aperture_ratio) res.warnings |= warn_closed_form_accuracy;
    return res;
}

} // namespace detail

inline CrbResult crb_mono_mimo(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                               const NoiseAndPowerConfig& cfg)
{
    cfg.validate();
    auto ip = intermediates_closed(geom, tgt, carrier);
    return detail::closed_form_result(bound_mono_mimo(ip, geom.num_tx, cfg, Method::ClosedForm), geom, tgt);
}

inline CrbResult crb_mono_phased(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                 const NoiseAndPowerConfig& cfg)
{
    cfg.validate();
    auto ip = intermediates_closed(geom, tgt, carrier);
    return detail::closed_form_result(bound_mono_phased(ip, geom.num_tx, cfg, Method::ClosedForm), geom, tgt);
}

inline CrbResult crb_bistatic_mimo(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                   const NoiseAndPowerConfig& cfg)
{
    cfg.validate();
    detail::check_topology(geom, Topology::BistaticNearFarTx);
    auto ip = intermediates_closed(geom, tgt, carrier);
    return detail::closed_form_result(
        bound_bistatic_mimo(ip, geom.num_tx, geom.num_rx, cfg, Method::ClosedForm), geom, tgt);
}

// The far-field receive response depends on (theta, r) only through sin(phi),
// so i s - k^2 vanishes identically and the result is always unidentifiable.
inline CrbResult crb_bistatic_phased(const ArrayGeometry& geom, const TargetLocation& tgt,
                                     const CarrierConfig& carrier, const NoiseAndPowerConfig& cfg)
{
    cfg.validate();
    detail::check_topology(geom, Topology::BistaticNearFarTx);
    auto ip = intermediates_closed(geom, tgt, carrier);
    CrbResult res = bound_bistatic_phased(ip, geom.num_tx, geom.num_rx, cfg, Method::ClosedForm);
    if (res.identifiable) res = CrbResult::unidentifiable(Method::ClosedForm);
    return detail::closed_form_result(res, geom, tgt);
}

inline CrbResult crb_closed_form(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                 const NoiseAndPowerConfig& cfg, Mode mode, Topology topology)
{
    if (topology == Topology::Monostatic) {
        detail::check_topology(geom, topology);
        return mode == Mode::MIMO ? crb_mono_mimo(geom, tgt, carrier, cfg) : crb_mono_phased(geom, tgt, carrier, cfg);
    }
    return mode == Mode::MIMO ? crb_bistatic_mimo(geom, tgt, carrier, cfg)
                              : crb_bistatic_phased(geom, tgt, carrier, cfg);
}

// Broadside range bound as a function of X = D_T/(2r) alone:
//   CRB_r = pref * lambda^2 / (4 pi^2 N h(X)),  h(X) = atan(X)/X - asinh(X)^2/X^2
// h is evaluated by its series below X = 0.05, where the difference cancels.
inline double broadside_range_shape(double X)
{
    if (!(X > 0.0)) throw DomainError("aperture ratio must be positive");
    if (X < 0.05) {
        double X2 = X * X;
        return X2 * X2 * (1.0 / 45.0 - X2 / 35.0 + 47.0 * X2 * X2 / 1575.0);
    }
    double as = std::asinh(X);
    return std::atan(X) / X - as * as / (X * X);
}

// Bistatic MIMO at theta = 0. The receive term carries (r/(R-r))^2, which is
// Gamma_theta^2 at broadside.
inline CrbResult crb_bistatic_broadside(const ArrayGeometry& geom, const TargetLocation& tgt,
                                        const CarrierConfig& carrier, const NoiseAndPowerConfig& cfg)
{
    detail::check_closed_form_domain(geom, tgt, carrier);
    detail::check_topology(geom, Topology::BistaticNearFarTx);
    cfg.validate();
    if (tgt.angle != 0.0) throw DomainError("broadside bistatic form requires theta = 0");
    const double lam = carrier.wavelength(), r = tgt.range, R = geom.array_separation;
    const double M = geom.num_tx, N = geom.num_rx, dR = geom.rx_spacing;
    const double eps = eps_tx(geom, tgt), xr = geom.tx_aperture() / r;
    const double pref = 1.0 / (2.0 * cfg.snr_linear * cfg.time_bandwidth);
    double a = 4.0 * pi * pi * r * r / (lam * lam * eps) * (xr - 2.0 * std::atan(0.5 * xr));
    double i = pi * pi * dR * dR * r * r * N * (N * N - 1.0) / (3.0 * lam * lam * (R - r) * (R - r));
    CrbResult out;
    out.method = Method::ClosedForm;
    out.crb_theta = pref * M / (M * i + N * a);
    out.crb_range = pref * lam * lam / (4.0 * pi * pi * N * broadside_range_shape(0.5 * xr));
    out.identifiable = std::isfinite(out.crb_theta) && std::isfinite(out.crb_range);
    if (!out.identifiable) out = CrbResult::unidentifiable(Method::ClosedForm);
    out.warnings = geometry_warnings(geom, tgt);
    return out;
}

struct RangeMinimum {
    double x_opt;     // D_T / (2r) at the minimum
    double crb_min;   // m^2
};

// Golden-section search of the broadside range bound over X = D_T/(2r).
inline RangeMinimum bistatic_range_crb_minimizer(const ArrayGeometry& geom, const TargetLocation& tgt,
                                                 const CarrierConfig& carrier, const NoiseAndPowerConfig& cfg)
{
    geom.validate();
    tgt.validate();
    cfg.validate();
    if (tgt.angle != 0.0) throw DomainError("range-bound minimiser is only defined at theta = 0");
    const double lam = carrier.wavelength(), N = geom.num_rx;
    const double pref = 1.0 / (2.0 * cfg.snr_linear * cfg.time_bandwidth);
    auto crb = [&](double X) { return pref * lam * lam / (4.0 * pi * pi * N * broadside_range_shape(X)); };

    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 1e-3, hi = 100.0;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = crb(x1), f2 = crb(x2);
    while (hi - lo > 1e-6) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = crb(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = crb(x2);
        }
    }
    double x = 0.5 * (lo + hi);
    return {x, crb(x)};
}

inline CrbResult crb_asymptotic(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                const NoiseAndPowerConfig& cfg, Regime regime, Mode mode, Topology topology)
{
    detail::check_closed_form_domain(geom, tgt, carrier);
    detail::check_topology(geom, topology);
    cfg.validate();
    const double lam = carrier.wavelength(), lam2 = lam * lam, r = tgt.range, d = geom.tx_spacing;
    const double M = geom.num_tx, th = tgt.angle;
    const double s = std::sin(th), c = std::cos(th), c2 = c * c;
    const double pref = 1.0 / (2.0 * cfg.snr_linear * cfg.time_bandwidth);
    const double x = geom.tx_aperture() / r;
    const double u = x / c;   // D_T / (r cos theta)

    CrbResult out;
    out.method = Method::Asymptotic;
    out.identifiable = true;
    out.warnings = geometry_warnings(geom, tgt);

    switch (regime) {
    case Regime::LargeAperture:
        if (x < 10.0) out.warnings |= warn_outside_regime;
        break;
    case Regime::InfiniteAperture:
        if (u < 100.0) out.warnings |= warn_outside_regime;
        break;
    case Regime::SmallAperture:
        if (x > 0.1) out.warnings |= warn_outside_regime;
        break;
    }

    if (topology == Topology::BistaticNearFarTx) {
        if (mode == Mode::Phased) return CrbResult::unidentifiable(Method::Asymptotic, out.warnings);
        if (th != 0.0) throw DomainError("bistatic asymptotic forms are only available at theta = 0");
        const double N = geom.num_rx, dR = geom.rx_spacing, R = geom.array_separation;
        out.identifiable = false;
        out.crb_range = inf;
        if (regime == Regime::InfiniteAperture) {
            out.crb_theta = pref * lam2 / (pi * pi * r * r * N * (dR * dR * (N * N - 1.0) / (3.0 * (R - r) * (R - r)) + 4.0));
        } else if (regime == Regime::SmallAperture) {
            double ratio = r / (R - r);
            out.crb_theta = pref * 3.0 * lam2 / (pi * pi * N * (dR * dR * ratio * ratio * (N * N - 1.0) + d * d * M * M));
        } else {
            throw DomainError("no large-aperture form for the bistatic topology");
        }
        return out;
    }

    // MIMO denominators carry 8 pi^2 M, phased ones 4 pi^2 M^2.
    const double mode_den = mode == Mode::MIMO ? 8.0 * M : 4.0 * M * M;
    switch (regime) {
    case Regime::LargeAperture: {
        double lu = std::log(u);
        double den = pi * u - 4.0 * lu * lu;
        double t = c2 * lu + s * s;
        out.crb_range = pref * lam2 * (x * x + pi * x * std::cos(2 * th) / c - 4.0 * (lu - 1.0) * (lu - 1.0) * s * s)
                        / (mode_den * pi * pi * den);
        out.crb_theta = pref * lam2 * (x * x * s * s + pi * x * c * std::cos(2 * th) - 4.0 * t * t)
                        / (mode_den * pi * pi * r * r * den * c2);
        if (!(den > 0.0) || !(out.crb_theta > 0.0) || !(out.crb_range > 0.0)) {
            out.warnings |= warn_outside_regime;
        }
        break;
    }
    case Regime::InfiniteAperture: {
        const double lim_den = mode == Mode::MIMO ? 8.0 : 4.0 * M;
        out.crb_theta = pref * lam2 * d * s * s / (lim_den * pi * pi * pi * r * r * r * c);
        out.crb_range = pref * lam2 * d * c / (lim_den * pi * pi * pi * r);
        if (th == 0.0) out.warnings |= warn_regime_degenerate;
        break;
    }
    case Regime::SmallAperture: {
        double base = mode == Mode::MIMO ? 2.0 * M * M * M : M * M * M * M;
        out.crb_theta = pref * 3.0 * lam2 / (pi * pi * d * d * base * c2) * xi_correction(th);
        // no range information survives as D_T/r -> 0
        out.crb_range = inf;
        out.identifiable = false;
        break;
    }
    }
    return out;
}

// Second-order (Fresnel) phase model.
inline CrbResult crb_taylor(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                            const NoiseAndPowerConfig& cfg, Mode mode)
{
    detail::check_closed_form_domain(geom, tgt, carrier);
    cfg.validate();
    const double lam2 = carrier.wavelength() * carrier.wavelength(), r = tgt.range, d = geom.tx_spacing;
    const double M = geom.num_tx, M2 = M * M;
    const double s = std::sin(tgt.angle), c = std::cos(tgt.angle), c2 = c * c;
    const double pref = 1.0 / (2.0 * cfg.snr_linear * cfg.time_bandwidth);
    if (geom.num_tx < 3) return CrbResult::unidentifiable(Method::Taylor, geometry_warnings(geom, tgt));

    CrbResult out;
    out.method = Method::Taylor;
    out.identifiable = true;
    out.warnings = geometry_warnings(geom, tgt);
    const double eta1 = M * (M2 - 1.0) / 12.0;
    const double ds = d * s, pdc = pi * d * d * c2;
    const double range_num = r * r * (15.0 * r * r + ds * ds * (M2 - 4.0));
    if (mode == Mode::MIMO) {
        out.crb_theta = pref * lam2 / (8.0 * pi * pi * d * d * c2 * eta1);
        out.crb_range = pref * 6.0 * lam2 * range_num / (pdc * pdc * M * (M2 - 1.0) * (M2 - 4.0));
    } else {
        out.crb_theta = pref * 3.0 * lam2 / (pi * pi * d * d * M2 * (M2 - 1.0) * c2);
        out.crb_range = pref * 12.0 * lam2 * range_num / (pdc * pdc * M2 * (M2 - 1.0) * (M2 - 4.0));
    }
    return out;
}

// Plane-wave reference bounds. No range information, so crb_range = inf.
inline CrbResult crb_farfield_upw(const ArrayGeometry& geom, const TargetLocation& tgt, const CarrierConfig& carrier,
                                  const NoiseAndPowerConfig& cfg, Mode mode, Topology topology)
{
    geom.validate();
    tgt.validate();
    carrier.validate();
    cfg.validate();
    detail::check_topology(geom, topology);
    if (std::abs(tgt.angle) == pi / 2) throw SingularGeometryError("plane-wave bound needs |theta| < pi/2");
    const double lam2 = carrier.wavelength() * carrier.wavelength(), d = geom.tx_spacing;
    const double M = geom.num_tx, M2 = M * M, c = std::cos(tgt.angle), c2 = c * c;
    const double pref = 1.0 / (2.0 * cfg.snr_linear * cfg.time_bandwidth);

    CrbResult out = CrbResult::unidentifiable(Method::FarFieldUPW);
    if (topology == Topology::Monostatic) {
        double den = mode == Mode::MIMO ? 2.0 * pi * pi * d * d * M * (M2 - 1.0) : pi * pi * d * d * M2 * (M2 - 1.0);
        out.crb_theta = pref * 3.0 * lam2 / (den * c2);
    } else {
        if (mode == Mode::Phased) throw DomainError("no plane-wave reference for bistatic phased sensing");
        const double N = geom.num_rx, dR = geom.rx_spacing;
        out.crb_theta = pref * 3.0 * lam2 / (pi * pi * N * (dR * dR * (N * N - 1.0) + d * d * (M2 - 1.0)) * c2);
    }
    return out;
}

} // namespace nfcrb
