#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rodsim {

// Homogeneous circular cross-section material. `radius` is the rod radius;
// area and section moments follow from it exactly.
struct Material {
    double youngs_modulus = 0.0;  // E [Pa]
    double shear_modulus = 0.0;   // G [Pa]
    double density = 0.0;         // rho [kg/m^3]
    double radius = 0.0;          // h [m]

    Material() = default;
    Material(double E, double G, double rho, double h)
        : youngs_modulus(E), shear_modulus(G), density(rho), radius(h) {
        if (!(E > 0.0) || !(G > 0.0) || !(rho > 0.0) || !(h > 0.0))
            throw std::invalid_argument("material parameters must be positive");
    }

    static Material from_poisson(double E, double poisson, double rho, double h) {
        return Material(E, E / (2.0 * (1.0 + poisson)), rho, h);
    }

    double area() const { return std::numbers::pi * radius * radius; }               // A = pi h^2
    double bending_inertia() const { return std::numbers::pi * std::pow(radius, 4) / 4.0; }  // I
    double polar_inertia() const { return std::numbers::pi * std::pow(radius, 4) / 2.0; }    // J

    double ea() const { return youngs_modulus * area(); }
    double ei() const { return youngs_modulus * bending_inertia(); }
    double gj() const { return shear_modulus * polar_inertia(); }
};

}  // namespace rodsim
