#pragma once

#include <Eigen/Dense>

#include <functional>

#include "nocp/mesh.hpp"

namespace nocp {

using ScalarField = std::function<double(const Eigen::Vector2d&)>;
using MatrixField = std::function<Eigen::Matrix2d(const Eigen::Vector2d&)>;

/// Diffusion tensor A(x) (SPD, alpha|xi|^2 <= xi^t A xi <= beta|xi|^2) and
/// reaction coefficient kappa(x) >= 0 with ||kappa||_{L1} > 0.
struct CoefficientField {
  MatrixField A;
  ScalarField kappa;
  double alpha = 1.0;
  double beta = 1.0;
};

CoefficientField identity_coefficient();
CoefficientField scalar_coefficient(ScalarField a, ScalarField kappa,
                                    double alpha, double beta);

/// a(x)*I with a piecewise constant on an n x n grid of square cells over
/// [0,1]^2, values log-uniform in [alpha, beta], kappa = 1. Deterministic in
/// the seed.
CoefficientField rough_checkerboard(int cells, double alpha, double beta,
                                    unsigned seed);

/// Spot-checks symmetry, the ellipticity window and kappa >= 0 at element
/// quadrature points. Throws std::invalid_argument on violation.
void check_coefficient(const CoefficientField& coeff, const Mesh& mesh);

}  // namespace nocp
