#include "mpx/diagnostics.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "mpx/quadrature.hpp"

namespace mpx {

namespace {

void put(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (v) {
    if (!std::isfinite(*v)) throw std::invalid_argument("time series: non-finite value");
    out << *v;
  }
}

std::optional<double> parse_optional(const std::string& field) {
  if (field.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size()) {
    throw std::invalid_argument("time series: bad number '" + field + "'");
  }
  return v;
}

}  // namespace

TimeSeriesWriter::TimeSeriesWriter(std::ostream& out) : out_(out) {
  out_ << kTimeSeriesHeader << '\n';
}

void TimeSeriesWriter::write(const DiagnosticsRecord& r) {
  if (!std::isfinite(r.time)) throw std::invalid_argument("time series: non-finite time");
  if (last_time_ && !(r.time > *last_time_)) {
    throw std::invalid_argument("time series: times must be strictly increasing");
  }
  last_time_ = r.time;
  out_ << std::setprecision(17) << r.step << ',' << r.time;
  put(out_, r.mass);
  put(out_, r.hamiltonian);
  put(out_, r.entropy);
  put(out_, r.enstrophy);
  put(out_, r.palinstrophy);
  put(out_, r.entropy_residual);
  put(out_, r.rel_l2_error);
  out_ << ',';
  if (r.fp_iterations) out_ << *r.fp_iterations;
  out_ << '\n';
}

std::vector<DiagnosticsRecord> read_time_series(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTimeSeriesHeader) {
    throw std::invalid_argument("time series: missing or unexpected header");
  }
  std::vector<DiagnosticsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 10) throw std::invalid_argument("time series: expected 10 fields");
    DiagnosticsRecord r;
    r.step = std::stoi(fields[0]);
    r.time = *parse_optional(fields[1]);
    r.mass = parse_optional(fields[2]);
    r.hamiltonian = parse_optional(fields[3]);
    r.entropy = parse_optional(fields[4]);
    r.enstrophy = parse_optional(fields[5]);
    r.palinstrophy = parse_optional(fields[6]);
    r.entropy_residual = parse_optional(fields[7]);
    r.rel_l2_error = parse_optional(fields[8]);
    if (!fields[9].empty()) r.fp_iterations = std::stoi(fields[9]);
    out.push_back(r);
  }
  return out;
}

void write_time_series(const std::string& path, const std::vector<DiagnosticsRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open time series file: " + path);
  TimeSeriesWriter writer(out);
  for (const auto& r : records) writer.write(r);
}

double rel_l2_error(const Vector& a, const ExactField& exact, const P1Space& space) {
  if (a.size() != space.n_dofs()) throw std::invalid_argument("rel_l2_error: size mismatch");
  double err2 = 0.0;
  double ref2 = 0.0;
  if (space.is_1d()) {
    const auto& mesh = space.mesh_1d();
    const int n = mesh.n_nodes;
    for (int c = 0; c < n; ++c) {
      const double x0 = mesh.node_coords[c];
      const double u0 = a(c), u1 = a((c + 1) % n);
      for (std::size_t q = 0; q < quadrature::gauss4.nodes.size(); ++q) {
        const double s = quadrature::gauss4.nodes[q];
        const double w = quadrature::gauss4.weights[q] * mesh.h;
        const double u = exact(Point3(x0 + s * mesh.h, 0.0, 0.0));
        const double uh = (1.0 - s) * u0 + s * u1;
        err2 += w * (u - uh) * (u - uh);
        ref2 += w * u * u;
      }
    }
  } else {
    const auto& mesh = space.tri_mesh();
    const auto& rule = quadrature::dunavant4;
    for (std::size_t t = 0; t < space.elements().size(); ++t) {
      const auto& e = space.elements()[t];
      const auto& tri = mesh.triangles[t];
      for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        const auto& l = rule.bary[q];
        const Point3 x = l[0] * mesh.vertices[tri[0]] + l[1] * mesh.vertices[tri[1]] +
                         l[2] * mesh.vertices[tri[2]];
        const double u = exact(x);
        const double uh = l[0] * a(e.dofs[0]) + l[1] * a(e.dofs[1]) + l[2] * a(e.dofs[2]);
        const double w = rule.weights[q] * e.area;
        err2 += w * (u - uh) * (u - uh);
        ref2 += w * u * u;
      }
    }
  }
  if (!(ref2 > 0.0)) throw std::invalid_argument("rel_l2_error: exact solution vanishes");
  return std::sqrt(err2 / ref2);
}

double entropy_residual(const Vector& a0, const Vector& a1, double dt, double nu,
                        const SparseMatrix& mass, const SparseMatrix& stiffness, MetricSign sign) {
  const double sigma = sign == MetricSign::PositiveSemiDefinite ? 1.0 : -1.0;
  const double s0 = -0.5 * sigma * a0.dot(mass * a0);
  const double s1 = -0.5 * sigma * a1.dot(mass * a1);
  const Vector m = 0.5 * (a0 + a1);
  return (s1 - s0) / dt - sigma * nu * m.dot(stiffness * m);
}

void ConvergenceTable::add(int n_dofs, double error) {
  if (!rows.empty() && n_dofs <= rows.back().n_dofs) {
    throw std::invalid_argument("ConvergenceTable: N must be strictly increasing");
  }
  ConvergenceRow row{n_dofs, error, std::nullopt, std::nullopt};
  if (!rows.empty()) {
    const auto& prev = rows.back();
    const double r = std::log(prev.error / error) /
                     std::log(static_cast<double>(n_dofs) / prev.n_dofs);
    row.rate_dofs = r;
    row.rate_h = r * dimension;
  }
  rows.push_back(row);
}

double ConvergenceTable::fitted_rate_dofs(std::size_t first) const {
  const std::size_t n = rows.size() - std::min(first, rows.size());
  if (n < 2) throw std::invalid_argument("ConvergenceTable: need two rows to fit a rate");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = first; i < rows.size(); ++i) {
    const double x = std::log(static_cast<double>(rows[i].n_dofs));
    const double y = -std::log(rows[i].error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table) {
  out << "n_dofs,error,rate_dofs,rate_h\n" << std::setprecision(17);
  for (const auto& r : table.rows) {
    out << r.n_dofs << ',' << r.error << ',';
    if (r.rate_dofs) out << *r.rate_dofs;
    out << ',';
    if (r.rate_h) out << *r.rate_h;
    out << '\n';
  }
}

std::string convergence_json(const ConvergenceTable& table) {
  nlohmann::json j;
  j["dimension"] = table.dimension;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = {{"n_dofs", r.n_dofs}, {"error", r.error}};
    row["rate_dofs"] = r.rate_dofs ? nlohmann::json(*r.rate_dofs) : nlohmann::json(nullptr);
    row["rate_h"] = r.rate_h ? nlohmann::json(*r.rate_h) : nlohmann::json(nullptr);
    j["rows"].push_back(row);
  }
  if (table.rows.size() >= 2) j["fitted_rate_dofs"] = table.fitted_rate_dofs();
  return j.dump(2);
}

ConvergenceTable run_convergence_study(const std::function<ConvergenceSample(int)>& simulate,
                                       const std::vector<int>& resolutions, int dimension,
                                       int threads) {
  if (resolutions.empty()) throw std::invalid_argument("convergence study: no resolutions");
  std::vector<ConvergenceSample> samples(resolutions.size());
  if (threads > 1) {
    std::vector<std::future<ConvergenceSample>> jobs;
    for (int r : resolutions) jobs.push_back(std::async(std::launch::async, simulate, r));
    for (std::size_t i = 0; i < jobs.size(); ++i) samples[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < resolutions.size(); ++i) samples[i] = simulate(resolutions[i]);
  }
  ConvergenceTable table;
  table.dimension = dimension;
  for (const auto& s : samples) table.add(s.n_dofs, s.error);
  return table;
}

}  // namespace mpx
