#include "nocp/coefficient.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

namespace nocp {

CoefficientField identity_coefficient() {
  CoefficientField c;
  c.A = [](const Eigen::Vector2d&) { return Eigen::Matrix2d::Identity(); };
  c.kappa = [](const Eigen::Vector2d&) { return 1.0; };
  c.alpha = 1.0;
  c.beta = 1.0;
  return c;
}

CoefficientField scalar_coefficient(ScalarField a, ScalarField kappa,
                                    double alpha, double beta) {
  CoefficientField c;
  c.A = [a = std::move(a)](const Eigen::Vector2d& x) {
    return Eigen::Matrix2d(a(x) * Eigen::Matrix2d::Identity());
  };
  c.kappa = std::move(kappa);
  c.alpha = alpha;
  c.beta = beta;
  return c;
}

CoefficientField rough_checkerboard(int cells, double alpha, double beta,
                                    unsigned seed) {
  if (cells < 1) throw std::invalid_argument("rough_checkerboard: cells must be >= 1");
  if (!(0.0 < alpha && alpha <= beta))
    throw std::invalid_argument("rough_checkerboard: need 0 < alpha <= beta");
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(std::log(alpha), std::log(beta));
  auto values = std::make_shared<std::vector<double>>();
  values->reserve(cells * cells);
  for (int i = 0; i < cells * cells; ++i) values->push_back(std::exp(unif(rng)));

  auto lookup = [values, cells](const Eigen::Vector2d& x) {
    int i = std::min(cells - 1, std::max(0, int(std::floor(x.x() * cells))));
    int j = std::min(cells - 1, std::max(0, int(std::floor(x.y() * cells))));
    return (*values)[j * cells + i];
  };
  return scalar_coefficient(lookup, [](const Eigen::Vector2d&) { return 1.0; },
                            alpha, beta);
}

void check_coefficient(const CoefficientField& coeff, const Mesh& mesh) {
  const double tol = 1e-10;
  double kappa_l1 = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector2d x =
          0.5 * (mesh.vertices[tri[i]] + mesh.vertices[tri[(i + 1) % 3]]);
      const Eigen::Matrix2d A = coeff.A(x);
      if ((A - A.transpose()).cwiseAbs().maxCoeff() > tol * (1.0 + A.norm()))
        throw std::invalid_argument("check_coefficient: A not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(A);
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      if (lo < coeff.alpha * (1.0 - 1e-9) || hi > coeff.beta * (1.0 + 1e-9))
        throw std::invalid_argument("check_coefficient: ellipticity bounds violated");
      const double k = coeff.kappa(x);
      if (k < 0.0)
        throw std::invalid_argument("check_coefficient: kappa < 0");
      kappa_l1 += mesh.area(t) / 3.0 * k;
    }
  }
  if (kappa_l1 <= 0.0)
    throw std::invalid_argument("check_coefficient: kappa vanishes identically");
}

}  // namespace nocp
