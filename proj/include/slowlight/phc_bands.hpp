#pragma once

#include <array>
#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "slowlight/geometry.hpp"

namespace slowlight {

/// Rasterized permittivity of one W1 supercell. Samples are 1.0 inside
/// holes and n_eff^2 elsewhere. Sample (ix, iy) sits at
/// x = ix / nx, y = -height/2 + iy * height / ny (units of a).
struct DielectricMap {
  PhcGeometry geometry;
  int nx = 0;
  int ny = 0;
  double height = 0.0;
  std::vector<double> eps; // ix * ny + iy

  int resolution() const { return nx; }
  double at(int ix, int iy) const { return eps[static_cast<std::size_t>(ix) * ny + iy]; }
  Point2 sample_position(int ix, int iy) const {
    return {static_cast<double>(ix) / nx, -0.5 * height + iy * height / ny};
  }
  double cell_area() const { return height; }
  double sample_area() const { return height / (static_cast<double>(nx) * ny); }
};

/// Requires resolution >= 16 samples per lattice constant.
DielectricMap build_supercell(const PhcGeometry& geometry, int resolution);

struct SolverSettings {
  /// Plane waves with |G| <= cutoff (units 2*pi/a) are kept.
  double cutoff = 5.5;
  /// 0 selects 2 * supercell_rows + 6, enough to reach the defect bands.
  int n_bands = 0;
  double ng_cap = 500.0;
  /// Wavevector at which the guided band is identified.
  double identification_k = 0.4;
  /// Half-width (units of a) of the strip used for the confinement fraction.
  double confinement_half_width = 1.0;
  int threads = 1;
};

/// Default sampling: n_uniform points over [k_min, 0.5] plus n_tail extra
/// points packed into the last tail_width before the zone edge.
std::vector<double> default_k_samples(double k_min = 0.3, int n_uniform = 32, int n_tail = 8,
                                      double tail_width = 0.025);

/// TE plane-wave operator  H(G, G') = kappa(G - G') (k + G).(k + G')  with
/// kappa the Fourier coefficients of 1/eps taken straight from the raster.
/// Eigenvalues are (omega a / 2 pi c)^2. The basis is fixed by the cutoff and
/// does not move with k, so bases nest as the cutoff grows.
class PlaneWaveOperator {
public:
  PlaneWaveOperator(const DielectricMap& map, double cutoff);

  int size() const { return static_cast<int>(basis_.size()); }
  double cutoff() const { return cutoff_; }
  const std::vector<std::array<int, 2>>& basis() const { return basis_; }
  double gx(int i) const { return basis_[i][0]; }
  double gy(int i) const { return basis_[i][1] / height_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double height() const { return height_; }

  std::complex<double> kappa(int dmx, int dmy) const;

  Eigen::MatrixXcd assemble(double k) const;
  /// dH/dk, used for Hellmann-Feynman group velocities.
  Eigen::MatrixXcd assemble_derivative(double k) const;

private:
  int nx_;
  int ny_;
  double height_;
  double cutoff_;
  std::vector<std::complex<double>> kappa_;
  std::vector<std::array<int, 2>> basis_;
};

struct Eigenpairs {
  std::vector<double> omega;
  Eigen::MatrixXcd vectors;
};

/// Lowest n_bands eigenpairs at one k. Throws ConvergenceError carrying k and
/// the basis size when LAPACK reports failure.
Eigenpairs solve_at(const PlaneWaveOperator& op, double k, int n_bands);

/// Sampled dispersion. Band b is followed across k by eigenvector overlap,
/// so omega[b] is a continuous branch rather than the b-th lowest value.
struct BandStructure {
  PhcGeometry geometry;
  std::shared_ptr<const PlaneWaveOperator> op;
  std::vector<double> k;                   // units 2*pi/a, ascending
  std::vector<std::vector<double>> omega;  // [band][ik], units 2*pi*c/a
  std::vector<Eigen::MatrixXcd> vectors;   // [ik], column b = band b
  int guided_band = -1;
  std::optional<double> band_edge_wavelength_nm;
  double ng_cap = 500.0;

  int n_bands() const { return static_cast<int>(omega.size()); }
  /// Index of a sampled wavevector; throws ValidationError if k was not sampled.
  std::size_t k_index(double kv) const;
  double wavelength_nm(int band, std::size_t ik) const {
    return geometry.lattice_constant_nm / omega[band][ik];
  }
};

/// k_samples must lie in [0, 0.5]; negative k follows from time reversal.
BandStructure solve_bands(const DielectricMap& map, std::span<const double> k_samples,
                          int n_bands, const SolverSettings& settings = {});

struct GroupIndex {
  double value = 0.0;     // capped
  double raw = 0.0;       // uncapped, +inf where the slope vanishes
  bool saturated = false;
};

/// n_g = 1 / |d omega / dk| by a centred (non-uniform) three-point difference.
/// At k = 0 and k = 0.5 the band is mirrored, the slope vanishes and the cap is
/// returned with the saturation flag.
GroupIndex group_index(const BandStructure& bands, int band_index, double k);

/// Same quantity from the Hellmann-Feynman derivative of the eigenvalue.
GroupIndex group_index_hellmann_feynman(const BandStructure& bands, int band_index, double k);

/// Energy-normalized in-plane field of one Bloch mode on the supercell grid,
/// Bloch phase included. Sum eps |e|^2 dA = 1 with dA in units of a^2.
struct ModeField {
  PhcGeometry geometry;
  int nx = 0;
  int ny = 0;
  double height = 0.0;
  std::vector<double> eps;
  std::vector<std::complex<double>> ex;
  std::vector<std::complex<double>> ey;
  double k = 0.0;
  int band_index = -1;
  double omega = 0.0;
  double normalization_integral = 0.0;

  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(ix) * ny + iy; }
  Point2 sample_position(int ix, int iy) const {
    return {static_cast<double>(ix) / nx, -0.5 * height + iy * height / ny};
  }
  double sample_area() const { return height / (static_cast<double>(nx) * ny); }
  /// Bilinear interpolation, Bloch-periodic in x and periodic in y; exact at
  /// grid nodes.
  std::array<std::complex<double>, 2> at(Point2 p) const;
  ModeField conjugated() const;
};

/// Throws DegenerateModeError when another computed band shares the
/// eigenvalue at this k.
ModeField mode_field(const DielectricMap& map, const BandStructure& bands, int band_index,
                     double k);

double energy_integral(const ModeField& field);
double confinement_fraction(const ModeField& field, double half_width);
/// Overlap of e_y with its y-mirror image: +1 even, -1 odd.
double mirror_parity(const ModeField& field);

} // namespace slowlight
