#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace rodsim {

namespace {

// roots of cos(x)cosh(x) = -1 by bisection; x_n ~ (2n-1)pi/2
double clamped_free_root(int n) {
    auto f = [](double x) { return std::cos(x) * std::cosh(x) + 1.0; };
    double lo = (n == 1) ? 1.0 : (2 * n - 1) * M_PI / 2.0 - 1.0;
    double hi = (2 * n - 1) * M_PI / 2.0 + 1.0;
    double flo = f(lo);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

CantileverOracle::CantileverOracle(const Material& material, double length, double tip_velocity,
                                   int mode_count)
    : length_(length), tip_velocity_(tip_velocity) {
    if (mode_count < 1) throw std::invalid_argument("need at least one mode");
    const double ei = material.ei();
    const double rho_a = material.density * material.area();
    beta_.resize(mode_count);
    omega_.resize(mode_count);
    sigma_.resize(mode_count);
    for (int n = 0; n < mode_count; ++n) {
        const double bl = clamped_free_root(n + 1);
        beta_[n] = bl / length;
        omega_[n] = bl * bl * std::sqrt(ei / (rho_a * std::pow(length, 4)));
        sigma_[n] = (std::cosh(bl) + std::cos(bl)) / (std::sinh(bl) + std::sin(bl));
    }
    // project the initial velocity field onto the modes: b_n = (1/L) int v0 Wn
    const int quad = 4000;
    amp_.assign(mode_count, 0.0);
    for (int n = 0; n < mode_count; ++n) {
        double integral = 0.0;
        for (int k = 0; k <= quad; ++k) {
            const double s = length * k / quad;
            const double w = (k == 0 || k == quad) ? 0.5 : 1.0;
            integral += w * initial_velocity(s) * mode_shape(n, s);
        }
        integral *= length / quad;
        amp_[n] = integral / length / omega_[n];
    }
}

double CantileverOracle::mode_shape(int mode, double s) const {
    const double x = beta_[mode] * s;
    return std::cosh(x) - std::cos(x) - sigma_[mode] * (std::sinh(x) - std::sin(x));
}

double CantileverOracle::initial_velocity(double s) const {
    return tip_velocity_ * mode_shape(0, s) / mode_shape(0, length_);
}

double CantileverOracle::deflection(double s, double t) const {
    double w = 0.0;
    for (size_t n = 0; n < omega_.size(); ++n)
        w += amp_[n] * mode_shape(static_cast<int>(n), s) * std::sin(omega_[n] * t);
    return w;
}

double CantileverOracle::tip_amplitude() const {
    return std::abs(amp_[0] * mode_shape(0, length_));
}

double friction_oracle(double push_force, double mu, double mass, double gravity, double t) {
    const double f = std::abs(push_force);
    const double threshold = std::abs(mu * mass * gravity);
    if (f <= threshold) return 0.0;
    const double net = f - threshold;
    return t * t / (2.0 * mass) * net * net;
}

}  // namespace rodsim
