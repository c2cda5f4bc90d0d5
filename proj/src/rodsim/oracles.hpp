#pragma once

#include <vector>

#include "material.hpp"

namespace rodsim {

// Euler-Bernoulli clamped-free beam, free vibration from a velocity-only
// initial condition. Mode shapes solve cos(bL)cosh(bL) = -1; amplitudes are
// projected from the initial velocity field by quadrature.
class CantileverOracle {
public:
    CantileverOracle(const Material& material, double length, double tip_velocity,
                     int mode_count = 5);

    double omega(int mode) const { return omega_[mode]; }
    // normalized shape W_n with integral of W^2 over [0,L] equal to L
    double mode_shape(int mode, double s) const;
    // initial velocity profile applied to the rod: first mode scaled to the
    // tip velocity
    double initial_velocity(double s) const;
    // z-deflection at arc position s, time t
    double deflection(double s, double t) const;
    double tip_deflection(double t) const { return deflection(length_, t); }
    double tip_amplitude() const;  // |b1|/omega1 * |W1(L)|

private:
    double length_;
    double tip_velocity_;
    std::vector<double> beta_;   // roots b_n L / L
    std::vector<double> omega_;
    std::vector<double> sigma_;
    std::vector<double> amp_;    // b_n / omega_n
};

// Kinetic energy of a rod pushed axially along a frictional floor at time t
// after force onset from rest.
double friction_oracle(double push_force, double mu, double mass, double gravity, double t);

}  // namespace rodsim
