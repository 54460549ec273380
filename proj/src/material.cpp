#include "grafem/material.hpp"

#include <cmath>

namespace grafem {

EnergyModel energy_model_from_string(const std::string& name) {
  if (name == "stable_neo_hookean") return EnergyModel::stable_neo_hookean;
  if (name == "stvk") return EnergyModel::stvk;
  throw FormatError("unknown energy model '" + name + "'");
}

std::string to_string(EnergyModel model) {
  return model == EnergyModel::stvk ? "stvk" : "stable_neo_hookean";
}

MaterialParams MaterialParams::from_youngs(double youngs, double poisson, double density,
                                           double sigma_thres, double r_d,
                                           EnergyModel model) {
  MaterialParams p;
  p.youngs = youngs;
  p.poisson = poisson;
  p.density = density;
  p.sigma_thres = sigma_thres;
  p.r_d = r_d;
  p.energy_model = model;
  p.derive_lame();
  p.validate();
  return p;
}

void MaterialParams::derive_lame() {
  mu = youngs / (2.0 * (1.0 + poisson));
  lambda = youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
}

void MaterialParams::validate() const {
  if (!(youngs > 0.0)) throw FormatError("youngs modulus must be positive");
  if (!(poisson >= 0.0 && poisson < 0.5)) throw FormatError("poisson ratio must be in [0, 0.5)");
  if (!(density > 0.0)) throw FormatError("density must be positive");
  if (!(sigma_thres > 0.0)) throw FormatError("sigma_thres must be positive");
  if (!(r_d >= 0.0)) throw FormatError("r_d must be non-negative");
}

namespace {

// cofactor matrix: dJ/dF, well defined for any F (no inverse involved)
Mat3 cofactor(const Mat3& f) {
  Mat3 c;
  c.col(0) = f.col(1).cross(f.col(2));
  c.col(1) = f.col(2).cross(f.col(0));
  c.col(2) = f.col(0).cross(f.col(1));
  return c;
}

Mat3 cofactor_differential(const Mat3& f, const Mat3& df) {
  Mat3 c;
  c.col(0) = df.col(1).cross(f.col(2)) + f.col(1).cross(df.col(2));
  c.col(1) = df.col(2).cross(f.col(0)) + f.col(2).cross(df.col(0));
  c.col(2) = df.col(0).cross(f.col(1)) + f.col(0).cross(df.col(1));
  return c;
}

// rest-stable volume offset of the stable Neo-Hookean model
double nh_alpha(const MaterialParams& p) {
  return 1.0 + p.mu / p.lambda - p.mu / (4.0 * p.lambda);
}

}  // namespace

double energy_density(const Mat3& F, const MaterialParams& p) {
  if (p.energy_model == EnergyModel::stvk) {
    const Mat3 C = F.transpose() * F;
    const double ic = C.trace();
    const double iic = C.cwiseProduct(C).sum();
    return 0.125 * p.lambda * (ic - 3.0) * (ic - 3.0) +
           0.25 * p.mu * (iic - 2.0 * ic + 3.0);
  }
  const double ic = F.squaredNorm();
  const double j = F.determinant();
  const double a = nh_alpha(p);
  return 0.5 * p.mu * (ic - 3.0) + 0.5 * p.lambda * (j - a) * (j - a) -
         0.5 * p.mu * std::log(ic + 1.0);
}

Mat3 pk1(const Mat3& F, const MaterialParams& p) {
  if (p.energy_model == EnergyModel::stvk) {
    const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
    return F * (2.0 * p.mu * E + p.lambda * E.trace() * Mat3::Identity());
  }
  const double ic = F.squaredNorm();
  const double j = F.determinant();
  const double a = nh_alpha(p);
  return p.mu * (1.0 - 1.0 / (ic + 1.0)) * F + p.lambda * (j - a) * cofactor(F);
}

Mat3 pk1_differential(const Mat3& F, const Mat3& dF, const MaterialParams& p) {
  if (p.energy_model == EnergyModel::stvk) {
    const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
    const Mat3 dE = 0.5 * (dF.transpose() * F + F.transpose() * dF);
    return dF * (2.0 * p.mu * E + p.lambda * E.trace() * Mat3::Identity()) +
           F * (2.0 * p.mu * dE + p.lambda * dE.trace() * Mat3::Identity());
  }
  const double ic = F.squaredNorm();
  const double dic = 2.0 * F.cwiseProduct(dF).sum();
  const double j = F.determinant();
  const Mat3 cof = cofactor(F);
  const double dj = cof.cwiseProduct(dF).sum();
  const double a = nh_alpha(p);
  return p.mu * (1.0 - 1.0 / (ic + 1.0)) * dF +
         p.mu * dic / ((ic + 1.0) * (ic + 1.0)) * F +
         p.lambda * dj * cof + p.lambda * (j - a) * cofactor_differential(F, dF);
}

Vec6 pack_symmetric_stress(const Mat3& s) {
  Vec6 v;
  v << s(0, 0), s(1, 1), s(2, 2), 2.0 * s(0, 1), 2.0 * s(0, 2), 2.0 * s(1, 2);
  return v;
}

StressSixVector cartesian_stress_sixvector(const Mat3& F, const MaterialParams& p) {
  StressSixVector out;
  const Mat3 P = pk1(F, p);
  const double j = F.determinant();
  Mat3 sigma;
  if (j > 0.0) {
    sigma = (P * F.transpose()) / j;
    sigma = 0.5 * (sigma + sigma.transpose());  // scrub roundoff asymmetry
  } else {
    sigma = 0.5 * (P + P.transpose());
    out.pk1_fallback = true;
  }
  out.c = pack_symmetric_stress(sigma);
  return out;
}

}  // namespace grafem
