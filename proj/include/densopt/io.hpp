#pragma once

#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "densopt/density.hpp"
#include "densopt/error.hpp"
#include "densopt/mesh.hpp"

namespace densopt {

using AnyDensity = std::variant<DensityField1D, DensityField>;

// Text format:
//   D1 <a> <n>                           interval [0,a] with n cells, then n+1 values
//   D2 <nx> <ny> <x0> <y0> <x1> <y1>     structured grid, then (nx+1)(ny+1) values
// one nodal value per line, in DOF order.

inline void write_density(std::ostream& os, const DensityField1D& rho)
{
    const auto prec = os.precision(17);
    os << "D1 " << rho.mesh().length() << ' ' << rho.mesh().cells() << '\n';
    for (Eigen::Index i = 0; i < rho.size(); ++i) os << rho[i] << '\n';
    os.precision(prec);
}

inline void write_density(std::ostream& os, const DensityField& rho)
{
    const auto& g = rho.mesh().grid();
    detail::require(g.has_value(), "write_density: only structured grid meshes can be written");
    const auto prec = os.precision(17);
    os << "D2 " << g->nx << ' ' << g->ny << ' ' << g->box.x0 << ' ' << g->box.y0 << ' ' << g->box.x1 << ' '
       << g->box.y1 << '\n';
    for (Eigen::Index i = 0; i < rho.size(); ++i) os << rho[i] << '\n';
    os.precision(prec);
}

namespace detail {

inline Eigen::VectorXd read_values(std::istream& is, std::size_t count)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        double x;
        if (!(is >> x)) throw InputError("density file: expected " + std::to_string(count) + " values, got " + std::to_string(i));
        v[static_cast<Eigen::Index>(i)] = x;
    }
    std::string extra;
    if (is >> extra) throw InputError("density file: trailing data '" + extra + "'");
    return v;
}

} // namespace detail

inline AnyDensity read_density(std::istream& is)
{
    std::string tag;
    if (!(is >> tag)) throw InputError("density file: empty input");
    if (tag == "D1") {
        double a;
        int n;
        if (!(is >> a >> n)) throw InputError("density file: malformed D1 header");
        auto mesh = std::make_shared<const IntervalMesh>(a, n);
        auto v = detail::read_values(is, mesh->node_count());
        return DensityField1D(std::move(mesh), std::move(v));
    }
    if (tag == "D2") {
        int nx, ny;
        Rect box;
        if (!(is >> nx >> ny >> box.x0 >> box.y0 >> box.x1 >> box.y1)) throw InputError("density file: malformed D2 header");
        auto mesh = std::make_shared<const TriMesh>(build_tri_mesh(nx, ny, box));
        auto v = detail::read_values(is, mesh->vertex_count());
        return DensityField(std::move(mesh), std::move(v));
    }
    throw InputError("density file: unknown tag '" + tag + "'");
}

inline AnyDensity read_density_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open density file " + path);
    return read_density(in);
}

inline void write_density_file(const std::string& path, const AnyDensity& rho)
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    std::visit([&](const auto& r) { write_density(out, r); }, rho);
}

/// Values on the (nx+1) x (ny+1) vertex lattice, one CSV row per lattice row, bottom row first.
inline void write_csv_grid(std::ostream& os, const DensityField& rho)
{
    const auto& g = rho.mesh().grid();
    detail::require(g.has_value(), "csv_grid export needs a structured grid");
    const auto prec = os.precision(17);
    for (int j = 0; j <= g->ny; ++j) {
        for (int i = 0; i <= g->nx; ++i) {
            if (i) os << ',';
            os << rho[static_cast<Eigen::Index>(j) * (g->nx + 1) + i];
        }
        os << '\n';
    }
    os.precision(prec);
}

/// Binary PGM ("P5", maxval 255): one pixel per lattice vertex, top row first,
/// value round(255ρ) with halves rounded up.
inline void write_ppm(std::ostream& os, const DensityField& rho)
{
    const auto& g = rho.mesh().grid();
    detail::require(g.has_value(), "ppm export needs a structured grid");
    const int w = g->nx + 1, h = g->ny + 1;
    os << "P5\n" << w << ' ' << h << "\n255\n";
    for (int j = h - 1; j >= 0; --j)
        for (int i = 0; i < w; ++i) {
            const double v = rho[static_cast<Eigen::Index>(j) * w + i];
            const int px = static_cast<int>(std::floor(255.0 * v + 0.5));
            os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(px, 0, 255))));
        }
}

} // namespace densopt
