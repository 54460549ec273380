#pragma once

#include <string>

#include "grafem/types.hpp"

namespace grafem {

enum class EnergyModel { stable_neo_hookean, stvk };

EnergyModel energy_model_from_string(const std::string& name);
std::string to_string(EnergyModel model);

struct MaterialParams {
  double youngs = 1e6;          // Pa
  double poisson = 0.3;
  double density = 1000.0;      // kg/m^3
  double mu = 0.0, lambda = 0.0;  // Lame parameters, Pa
  double sigma_thres = 1e5;     // Pa, edge-stress fracture threshold
  double r_d = 0.0;             // m, non-local kernel support radius
  double damp_mass_coeff = 0.0;   // 1/s
  double damp_stiff_coeff = 0.0;  // s
  EnergyModel energy_model = EnergyModel::stable_neo_hookean;

  /// Derive Lame parameters from (E, nu) and validate ranges.
  static MaterialParams from_youngs(double youngs, double poisson, double density,
                                    double sigma_thres, double r_d = 0.0,
                                    EnergyModel model = EnergyModel::stable_neo_hookean);
  void derive_lame();
  void validate() const;
};

/// Strain energy density Psi(F) in J/m^3 for the selected model.
double energy_density(const Mat3& F, const MaterialParams& params);

/// First Piola-Kirchhoff stress P = dPsi/dF.
Mat3 pk1(const Mat3& F, const MaterialParams& params);

/// Directional derivative of pk1 at F in direction dF.
Mat3 pk1_differential(const Mat3& F, const Mat3& dF, const MaterialParams& params);

/// Symmetric stress packed as (xx, yy, zz, xy, xz, yz) with the shear slots
/// carrying a factor 2, so that dotting a direction-cosine row
/// (cx^2, cy^2, cz^2, cx*cy, cx*cz, cy*cz) with this vector yields the normal
/// stress n.sigma.n along that direction.
struct StressSixVector {
  Vec6 c = Vec6::Zero();
  bool pk1_fallback = false;  // det F <= 0: symmetrized PK1 was used
};

/// Pack a symmetric tensor into the six-vector convention above.
Vec6 pack_symmetric_stress(const Mat3& s);

/// Cauchy stress (P F^T / J) of the current deformation, packed. Falls back
/// to symmetrized PK1 when det F <= 0 and flags it.
StressSixVector cartesian_stress_sixvector(const Mat3& F, const MaterialParams& params);

}  // namespace grafem
