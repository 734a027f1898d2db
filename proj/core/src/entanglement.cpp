#include "kfim/entanglement.hpp"

#include <stdexcept>

namespace kfim {

Eigen::MatrixXcd coefficient_matrix(const StateVector& state, int sites) {
  if (sites < 2 || sites % 2 != 0)
    throw std::invalid_argument("coefficient_matrix: even chain length required");
  const Eigen::Index dim = Eigen::Index(1) << sites;
  if (state.size() != dim)
    throw std::invalid_argument("coefficient_matrix: state dimension mismatch");
  const Eigen::Index half = Eigen::Index(1) << (sites / 2);
  // Site 1 is the most significant bit, so the row block (first half of the
  // chain) is the high bits of the amplitude index: index = row * half + col.
  return Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic,
                                        Eigen::Dynamic, Eigen::RowMajor>>(
      state.data(), half, half);
}

SchmidtSpectrum schmidt_spectrum(const StateVector& state, int sites) {
  const Eigen::MatrixXcd c = coefficient_matrix(state, sites);
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(c);
  SchmidtSpectrum out;
  out.subsystem_dim = static_cast<int>(c.rows());
  out.values = svd.singularValues().array().square();
  return out;  // singular values come out descending; squares stay ordered
}

Eigen::VectorXd rescaled_spectrum(const SchmidtSpectrum& spectrum) {
  return spectrum.values * static_cast<double>(spectrum.subsystem_dim);
}

double lambda_max(const SchmidtSpectrum& spectrum) {
  if (spectrum.values.size() == 0)
    throw std::invalid_argument("lambda_max: empty spectrum");
  return spectrum.values[0];
}

}  // namespace kfim
