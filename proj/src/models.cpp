#include "mpx/models.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mpx/quadrature.hpp"

namespace mpx {

void KdvParams::validate() const {
  if (!(alpha > 0.0) || !(eta > 0.0)) throw std::invalid_argument("KdV: alpha and eta must be positive");
  if (!(nu >= 0.0)) throw std::invalid_argument("KdV: nu must be non-negative");
  if (!(domain_length > 0.0)) throw std::invalid_argument("KdV: domain length must be positive");
}

KdvOperators::KdvOperators(P1SpacePtr p1, double solver_tol) : space(std::move(p1)) {
  if (!space || !space->is_1d()) throw std::invalid_argument("KdvOperators: need a 1D space");
  mass = assemble_mass(*space);
  stiffness = assemble_stiffness(*space);
  advection = assemble_advection_1d(*space);
  triple = assemble_trilinear_kdv(*space);
  mass_solver = std::make_shared<SpdSolver>(mass, solver_tol);
}

double kdv_hamiltonian(const KdvParams& params, const KdvOperators& ops, const Vector& a) {
  return params.alpha / 6.0 * ops.triple.triple(a) - 0.5 * params.eta * a.dot(ops.stiffness * a);
}

Vector kdv_grad_hamiltonian(const KdvParams& params, const KdvOperators& ops, const Vector& a) {
  return 0.5 * params.alpha * ops.triple.contract(a, a) - params.eta * (ops.stiffness * a);
}

MetriplecticSystem kdv_system(const KdvParams& params, std::shared_ptr<const KdvOperators> ops) {
  params.validate();
  MetriplecticSystem sys;
  sys.name = "kdv";
  sys.mass = ops->mass;
  sys.mass_solver = ops->mass_solver;
  const SparseMatrix j = -ops->advection;
  const SparseMatrix g = params.nu * ops->stiffness;
  sys.j_builder = [j](const Vector&) { return j; };
  sys.g_builder = [g](const Vector&) { return g; };
  sys.g_sign = MetricSign::PositiveSemiDefinite;
  sys.h_value = [params, ops](const Vector& a) { return kdv_hamiltonian(params, *ops, a); };
  sys.grad_h = [params, ops](const Vector& a) { return kdv_grad_hamiltonian(params, *ops, a); };
  sys.s_value = [ops](const Vector& a) { return -0.5 * a.dot(ops->mass * a); };
  sys.grad_s = [ops](const Vector& a) { return Vector(-(ops->mass * a)); };
  const Vector m1 = ops->mass * Vector::Ones(ops->mass.rows());
  sys.casimirs.push_back({"mass", [m1](const Vector& a) { return m1.dot(a); },
                          [m1](const Vector&) { return m1; }});
  finalize(sys);
  return sys;
}

void NsParams::validate() const {
  if (!(nu >= 0.0)) throw std::invalid_argument("Navier-Stokes: nu must be non-negative");
}

NsOperators::NsOperators(P1SpacePtr p1, double solver_tol) : space(std::move(p1)) {
  if (!space || space->is_1d()) throw std::invalid_argument("NsOperators: need a surface space");
  mass = assemble_mass(*space);
  stiffness = assemble_stiffness(*space);
  mass_solver = std::make_shared<SpdSolver>(mass, solver_tol);
  stream_solver = std::make_shared<ZeroMeanPoissonSolver>(stiffness, mass, solver_tol);
}

NsInvariants ns_invariants(const Vector& a, const Vector& b, const NsOperators& ops) {
  const Vector ma = ops.mass * a;
  return {0.5 * ma.dot(b), 0.5 * ma.dot(a), 0.5 * a.dot(ops.stiffness * a)};
}

MetriplecticSystem ns_system(const NsParams& params, std::shared_ptr<const NsOperators> ops) {
  params.validate();
  MetriplecticSystem sys;
  sys.name = params.geometry == Geometry::Torus ? "ns-torus" : "ns-sphere";
  sys.mass = ops->mass;
  sys.mass_solver = ops->mass_solver;
  sys.j_builder = [ops](const Vector& a) { return assemble_ns_poisson_tensor(*ops->space, a); };
  sys.apply_j = [ops](const Vector& a, const Vector& b) { return ops->apply_j(a, b); };
  const SparseMatrix g = -params.nu * ops->stiffness;
  sys.g_builder = [g](const Vector&) { return g; };
  sys.g_sign = MetricSign::NegativeSemiDefinite;
  sys.h_value = [ops](const Vector& a) { return 0.5 * (ops->mass * a).dot(ops->stream(a)); };
  sys.grad_h = [ops](const Vector& a) { return Vector(ops->mass * ops->stream(a)); };
  sys.s_value = [ops](const Vector& a) { return 0.5 * a.dot(ops->mass * a); };
  sys.grad_s = [ops](const Vector& a) { return Vector(ops->mass * a); };
  sys.metriplectic = true;
  // Unscaled Ghat = -M^-1 K M^-1; Ghat grad H + a = a - M^-1 K b.
  sys.metric_null_residual = [ops](const Vector& a) {
    return Vector(a - ops->mass_solver->solve(ops->stiffness * ops->stream(a)));
  };
  sys.casimirs.push_back({"enstrophy", [ops](const Vector& a) { return 0.5 * a.dot(ops->mass * a); },
                          [ops](const Vector& a) { return Vector(ops->mass * a); }});
  const Vector m1 = ops->mass * Vector::Ones(ops->mass.rows());
  sys.casimirs.push_back({"total_vorticity", [m1](const Vector& a) { return m1.dot(a); },
                          [m1](const Vector&) { return m1; }});
  finalize(sys);
  return sys;
}

MetriplecticSystem ns_torus_system(const NsParams& params, std::shared_ptr<const NsOperators> ops) {
  if (ops->space->tri_mesh().geometry != Geometry::Torus) {
    throw std::invalid_argument("ns_torus_system: space is not a torus");
  }
  NsParams p = params;
  p.geometry = Geometry::Torus;
  return ns_system(p, std::move(ops));
}

MetriplecticSystem ns_sphere_system(const NsParams& params, std::shared_ptr<const NsOperators> ops) {
  if (ops->space->tri_mesh().geometry != Geometry::Sphere) {
    throw std::invalid_argument("ns_sphere_system: space is not a sphere");
  }
  NsParams p = params;
  p.geometry = Geometry::Sphere;
  return ns_system(p, std::move(ops));
}

std::pair<double, double> sphere_angles(const Point3& p) {
  const Point3 u = p.normalized();
  return {std::acos(std::clamp(u.z(), -1.0, 1.0)), std::atan2(u.y(), u.x())};
}

void PointVortexConfig::validate() const {
  if (n_vortices <= 0 || n_vortices % 2 != 0) {
    throw std::invalid_argument("point vortices: n_vortices must be positive and even");
  }
  if (!std::isfinite(intensity)) throw std::invalid_argument("point vortices: bad intensity");
}

namespace {
// Raw engine output mapped to [0, 1); independent of the library's
// distribution implementations.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace

Vector point_vortex_ic(const PointVortexConfig& config, const NsOperators& ops) {
  config.validate();
  const P1Space& space = *ops.space;
  if (space.tri_mesh().geometry != Geometry::Sphere) {
    throw std::invalid_argument("point_vortex_ic: requires the sphere");
  }
  std::mt19937_64 rng(config.seed);
  std::vector<Point3> centres;
  centres.reserve(config.n_vortices);
  for (int k = 0; k < config.n_vortices; ++k) {
    const double z = 2.0 * unit_uniform(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * unit_uniform(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    centres.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  const Vector m1 = ops.mass * Vector::Ones(space.n_dofs());
  auto remove_mean = [&](Vector a) {
    a.array() -= m1.dot(a) / m1.sum();
    return a;
  };

  if (config.profile == VortexProfile::Nodal) {
    Vector a = Vector::Zero(space.n_dofs());
    const auto& nodes = space.dof_coords();
    for (int k = 0; k < config.n_vortices; ++k) {
      int nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < space.n_dofs(); ++i) {
        const double d = (nodes[i] - centres[k]).squaredNorm();
        if (d < best) {
          best = d;
          nearest = i;
        }
      }
      a(nearest) += (k % 2 == 0 ? 1.0 : -1.0) * config.intensity;
    }
    return remove_mean(std::move(a));
  }

  const double sigma = config.regularisation_width > 0.0 ? config.regularisation_width
                                                          : 2.0 * space.tri_mesh().mean_edge_length();
  const double cutoff = 8.0 * sigma;
  auto vorticity = [&](const Point3& x) {
    const Point3 u = x.normalized();
    double sum = 0.0;
    for (int k = 0; k < config.n_vortices; ++k) {
      const double d = std::acos(std::clamp(u.dot(centres[k]), -1.0, 1.0));
      if (d > cutoff) continue;
      const double sign = k % 2 == 0 ? 1.0 : -1.0;
      sum += sign * config.intensity * std::exp(-0.5 * d * d / (sigma * sigma));
    }
    return sum;
  };

  Vector load = Vector::Zero(space.n_dofs());
  const auto& rule = quadrature::dunavant4;
  for (std::size_t t = 0; t < space.elements().size(); ++t) {
    const auto& e = space.elements()[t];
    const auto& tri = space.tri_mesh().triangles[t];
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const auto& l = rule.bary[q];
      const Point3 x = l[0] * space.tri_mesh().vertices[tri[0]] +
                       l[1] * space.tri_mesh().vertices[tri[1]] +
                       l[2] * space.tri_mesh().vertices[tri[2]];
      const double w = rule.weights[q] * e.area * vorticity(x);
      for (int p = 0; p < 3; ++p) load(e.dofs[p]) += w * l[p];
    }
  }
  return remove_mean(ops.mass_solver->solve(load));
}

MetriplecticSystem advection_diffusion_system(double velocity, double nu, P1SpacePtr space,
                                              double solver_tol) {
  if (!(nu >= 0.0)) throw std::invalid_argument("advection-diffusion: nu must be non-negative");
  MetriplecticSystem sys;
  sys.name = "advdiff";
  sys.mass = assemble_mass(*space);
  sys.mass_solver = std::make_shared<SpdSolver>(sys.mass, solver_tol);
  const SparseMatrix j = -velocity * assemble_advection_1d(*space);
  const SparseMatrix g = -nu * assemble_stiffness(*space);
  sys.j_builder = [j](const Vector&) { return j; };
  sys.g_builder = [g](const Vector&) { return g; };
  sys.g_sign = MetricSign::NegativeSemiDefinite;
  const SparseMatrix m = sys.mass;
  auto energy = [m](const Vector& a) { return 0.5 * a.dot(m * a); };
  auto grad = [m](const Vector& a) { return Vector(m * a); };
  sys.h_value = energy;
  sys.grad_h = grad;
  sys.s_value = energy;
  sys.grad_s = grad;
  const Vector m1 = m * Vector::Ones(m.rows());
  sys.casimirs.push_back({"mass", [m1](const Vector& a) { return m1.dot(a); },
                          [m1](const Vector&) { return m1; }});
  finalize(sys, solver_tol);
  return sys;
}

}  // namespace mpx
