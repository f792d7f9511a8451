#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "densopt/densopt.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace densopt;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitViolation = 4;

struct Options {
    int k = 1;
    double m = 0.4;
    double eps = 1e-3;
    double alpha = 0.0;
    double sigma = 0.1;
    double beta = 10.0;
    int mesh = 100;
    int seeds = 1;
    std::uint64_t seed = 1;
    int max_iters = 400;
    std::string scheme = "eps_eps2";
    double tol = 1e-9;
    std::string out_dir = ".";

    std::string input;
    std::string format = "csv_grid";
    std::string output;
    int dimension = 2;
    int kmax = 8;
    int kmin = 1;
    int cells_1d = 400;
    int corpus_mesh = 64;
    double tau = 0.01;
    std::string from_dir;
};

json options_json(const Options& o)
{
    return json{{"k", o.k},         {"m", o.m},           {"eps", o.eps},         {"alpha", o.alpha},
                {"sigma", o.sigma}, {"beta", o.beta},     {"mesh", o.mesh},       {"seeds", o.seeds},
                {"seed", o.seed},   {"max_iters", o.max_iters}, {"scheme", o.scheme}, {"tol", o.tol},
                {"out_dir", o.out_dir}, {"format", o.format}, {"N", o.dimension}, {"kmin", o.kmin},
                {"kmax", o.kmax},   {"cells_1d", o.cells_1d}, {"corpus_mesh", o.corpus_mesh}, {"tau", o.tau}};
}

/// One manifest per command run.
class Manifest {
public:
    Manifest(std::string command, const Options& o)
        : command_(std::move(command)), opts_(o), t0_(std::chrono::steady_clock::now())
    {
    }

    void input(const std::string& p) { inputs_.push_back(p); }
    void output(const std::string& p) { outputs_.push_back(p); }

    void write() const
    {
        json j;
        j["command"] = command_;
        j["config"] = options_json(opts_);
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        j["version"] = DENSOPT_VERSION;
        const auto path = fs::path(opts_.out_dir) / (command_ + "_manifest.json");
        std::ofstream f(path);
        if (!f) throw InputError("cannot write " + path.string());
        f << j.dump(2) << '\n';
    }

private:
    std::string command_;
    Options opts_;
    std::chrono::steady_clock::time_point t0_;
    std::vector<std::string> inputs_, outputs_;
};

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    return f;
}

EigenOptions eigen_options(const Options& o)
{
    EigenOptions eo;
    eo.tol = o.tol;
    return eo;
}

OptimizerConfig optimizer_config(const Options& o, int k)
{
    OptimizerConfig c;
    c.k = k;
    c.m = o.m;
    c.eps = o.eps;
    c.alpha = o.alpha;
    c.sigma = o.sigma;
    c.beta = o.beta;
    c.seed = o.seed;
    c.max_iters = o.max_iters;
    c.scheme = parse_scheme(o.scheme);
    c.eig_tol = o.tol;
    return c;
}

json report_json(const RunReport& r)
{
    json h = json::array();
    for (const auto& e : r.history)
        h.push_back({{"iteration", e.iteration}, {"objective", e.objective}, {"mu_k", e.mu_k}, {"mass", e.mass},
                     {"cluster_width", e.cluster_width}, {"step", e.step}});
    const auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    return json{{"seed", r.config.seed},
                {"status", to_string(r.status)},
                {"iterations", r.iterations},
                {"coarse_iterations", r.coarse_iterations},
                {"alpha", r.alpha},
                {"mass", r.mass},
                {"mu_k", r.mu_k},
                {"normalized", r.normalized},
                {"eigenvalues", r.eigenvalues},
                {"multiplicity", r.multiplicity},
                {"postprocessed_mu", num(r.postprocessed_mu)},
                {"postprocessed_normalized", num(r.postprocessed_normalized)},
                {"support_components", r.support_components},
                {"gray_area", r.gray_area},
                {"mass_within_tolerance", r.mass_within_tolerance},
                {"wall_seconds", r.wall_seconds},
                {"history", h}};
}

std::string fmt(double v, int digits = 6) { return detail::fixed(v, digits); }

// ---------------------------------------------------------------------------------------------

int cmd_eig(const Options& o)
{
    Manifest man("eig", o);
    man.input(o.input);
    detail::require(o.k >= 0, "eig: k must be nonnegative");
    const auto any = read_density_file(o.input);
    const Scheme scheme = o.eps == 0.0 ? Scheme::Unrelaxed : parse_scheme(o.scheme);
    Spectrum s;
    if (const auto* r2 = std::get_if<DensityField>(&any)) {
        s = solve_lowest(scheme == Scheme::Unrelaxed ? assemble_unrelaxed(*r2) : assemble(*r2, o.eps, scheme),
                         o.k + 1, eigen_options(o));
    } else {
        detail::require(scheme != Scheme::EpsEps, "eig: the eps_eps scheme is only available in 2D");
        const auto& r1 = std::get<DensityField1D>(any);
        s = spectrum_1d(r1, r1, o.k, scheme == Scheme::Unrelaxed ? 0.0 : o.eps, eigen_options(o));
    }
    write_spectrum(std::cout, s);
    const auto path = fs::path(o.out_dir) / "spectrum.txt";
    auto f = open_out(path);
    write_spectrum(f, s);
    man.output(path.string());
    man.write();
    return 0;
}

int cmd_spurious(const Options& o)
{
    Manifest man("spurious", o);
    const auto rows = spurious_table(o.mesh, spurious_eps_values(), eigen_options(o));
    write_spurious_csv(std::cout, rows);
    const auto path = fs::path(o.out_dir) / "spurious.csv";
    auto f = open_out(path);
    write_spurious_csv(f, rows);
    man.output(path.string());
    man.write();
    return 0;
}

/// Runs the multistart for one k and writes density, report, summary and history.
RunReport optimize_one(const Options& o, int k, Manifest& man)
{
    auto mesh = std::make_shared<const TriMesh>(build_tri_mesh(o.mesh, o.mesh, Rect{0.0, 0.0, 1.0, 1.0}));
    std::vector<RunReport> reports;
    auto [best, report] = multistart(mesh, optimizer_config(o, k), o.seeds, &reports);
    const fs::path dir(o.out_dir);
    const std::string tag = "_k" + std::to_string(k);

    const auto dpath = dir / ("density" + tag + ".txt");
    write_density_file(dpath.string(), best);
    man.output(dpath.string());

    json rj;
    rj["k"] = k;
    rj["best_seed"] = report.config.seed;
    rj["best"] = report_json(report);
    rj["runs"] = json::array();
    for (const auto& r : reports) rj["runs"].push_back(report_json(r));
    const auto rpath = dir / ("report" + tag + ".json");
    open_out(rpath) << rj.dump(2) << '\n';
    man.output(rpath.string());

    const auto spath = dir / ("summary" + tag + ".csv");
    {
        auto f = open_out(spath);
        f << "seed,status,iterations,coarse_iterations,mass,mu_k,normalized,multiplicity,postprocessed_mu,"
             "postprocessed_normalized,support_components\n";
        for (const auto& r : reports)
            f << r.config.seed << ',' << to_string(r.status) << ',' << r.iterations << ',' << r.coarse_iterations
              << ',' << fmt(r.mass) << ',' << fmt(r.mu_k) << ',' << fmt(r.normalized) << ',' << r.multiplicity << ','
              << fmt(r.postprocessed_mu) << ',' << fmt(r.postprocessed_normalized) << ',' << r.support_components
              << '\n';
    }
    man.output(spath.string());

    const auto hpath = dir / ("history" + tag + ".csv");
    {
        auto f = open_out(hpath);
        f << "iteration,objective,mu_k,mass,cluster_width,step\n";
        for (const auto& h : report.history)
            f << h.iteration << ',' << fmt(h.objective, 8) << ',' << fmt(h.mu_k, 8) << ',' << fmt(h.mass, 8) << ','
              << h.cluster_width << ',' << fmt(h.step, 8) << '\n';
    }
    man.output(hpath.string());

    std::cout << "k=" << k << " best seed " << report.config.seed << ": m*mu_k = " << fmt(report.normalized, 4)
              << " (mu_k " << fmt(report.mu_k, 4) << ", mass " << fmt(report.mass, 4) << ", multiplicity "
              << report.multiplicity << ", postprocessed " << fmt(report.postprocessed_normalized, 4) << ")\n";
    return report;
}

int cmd_optimize(const Options& o)
{
    Manifest man("optimize", o);
    optimize_one(o, o.k, man);
    man.write();
    return 0;
}

/// Reads the best ‖ρ‖₁μ_k and its multiplicity from a report written by `optimize`.
std::pair<double, int> read_report(const fs::path& p)
{
    std::ifstream f(p);
    if (!f) throw InputError("cannot open " + p.string());
    json j;
    try {
        f >> j;
        return {j.at("best").at("normalized").get<double>(), j.at("best").at("multiplicity").get<int>()};
    } catch (const json::exception& e) {
        throw InputError("malformed report " + p.string() + ": " + e.what());
    }
}

int cmd_table2(const Options& o)
{
    Manifest man("table2", o);
    detail::require(1 <= o.kmin && o.kmin <= o.kmax && o.kmax <= 8, "table2: need 1 <= kmin <= kmax <= 8");
    std::ostringstream csv;
    csv << "k,value,reference_density,reference_union_of_discs,multiplicity,reference_multiplicity,"
           "meets_union_of_discs\n";
    for (int k = o.kmin; k <= o.kmax; ++k) {
        const auto& ref = reference_row(k);
        double value;
        int mult;
        if (!o.from_dir.empty()) {
            const auto p = fs::path(o.from_dir) / ("report_k" + std::to_string(k) + ".json");
            man.input(p.string());
            std::tie(value, mult) = read_report(p);
        } else {
            const auto r = optimize_one(o, k, man);
            value = r.normalized;
            mult = r.multiplicity;
        }
        csv << k << ',' << fmt(value, 4) << ',' << fmt(ref.optimal_density, 2) << ',' << fmt(ref.union_of_discs, 2)
            << ',' << mult << ',' << ref.multiplicity << ',' << (value >= ref.union_of_discs ? 1 : 0) << '\n';
    }
    std::cout << csv.str();
    const auto path = fs::path(o.out_dir) / "table2.csv";
    open_out(path) << csv.str();
    man.output(path.string());
    man.write();
    return 0;
}

std::vector<fs::path> sorted_files(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

int cmd_audit(const Options& o)
{
    Manifest man("audit-bounds", o);
    detail::require(o.dimension == 1 || o.dimension == 2, "audit-bounds: N must be 1 or 2");
    std::vector<AuditRow> rows;
    for (const auto& p : sorted_files(o.input)) {
        const auto any = read_density_file(p.string());
        const int dim = std::holds_alternative<DensityField>(any) ? 2 : 1;
        if (dim != o.dimension)
            throw InputError("audit-bounds: " + p.filename().string() + " is " + std::to_string(dim) +
                             "D, expected " + std::to_string(o.dimension) + "D");
        man.input(p.string());
        auto r = audit_density(p.stem().string(), any, o.kmax, o.eps, 5e-3, eigen_options(o));
        rows.insert(rows.end(), r.begin(), r.end());
    }
    detail::require(!rows.empty(), "audit-bounds: no density files in " + o.input);
    write_audit_csv(std::cout, rows);
    const auto path = fs::path(o.out_dir) / "audit.csv";
    auto f = open_out(path);
    write_audit_csv(f, rows);
    man.output(path.string());
    man.write();
    const auto bad = std::count_if(rows.begin(), rows.end(), [](const AuditRow& r) { return r.violation; });
    if (bad > 0) {
        std::cerr << "audit-bounds: " << bad << " bound violation(s)\n";
        return kExitViolation;
    }
    return 0;
}

int cmd_export(const Options& o)
{
    Manifest man("export", o);
    man.input(o.input);
    const auto any = read_density_file(o.input);
    const auto* rho = std::get_if<DensityField>(&any);
    detail::require(rho != nullptr, "export: needs a 2D density");
    const bool ppm = o.format == "ppm";
    detail::require(ppm || o.format == "csv_grid", "export: unknown format '" + o.format + "' (csv_grid | ppm)");
    fs::path out = o.output.empty()
                       ? fs::path(o.out_dir) / (fs::path(o.input).stem().string() + (ppm ? ".pgm" : ".csv"))
                       : fs::path(o.output);
    auto f = open_out(out);
    if (ppm)
        write_ppm(f, *rho);
    else
        write_csv_grid(f, *rho);
    man.output(out.string());
    man.write();
    return 0;
}

int cmd_make_corpus(const Options& o)
{
    Manifest man("make-corpus", o);
    const fs::path root(o.input);
    for (const auto& [sub, entries] :
         {std::pair{"2d", builtin_corpus_2d(o.corpus_mesh)}, std::pair{"1d", builtin_corpus_1d(o.cells_1d)}}) {
        fs::create_directories(root / sub);
        for (const auto& e : entries) {
            const auto p = root / sub / (e.name + ".txt");
            write_density_file(p.string(), e.rho);
            man.output(p.string());
            std::cout << p.string() << '\n';
        }
    }
    man.write();
    return 0;
}

int cmd_postprocess(const Options& o)
{
    Manifest man("postprocess", o);
    man.input(o.input);
    const auto any = read_density_file(o.input);
    const auto* rho = std::get_if<DensityField>(&any);
    detail::require(rho != nullptr, "postprocess: needs a 2D density");
    const auto sx = extract_support(*rho, o.tau);
    const auto merged = merged_support_spectrum(sx, o.k + 1, eigen_options(o));
    const auto relaxed = solve_lowest(assemble(*rho, o.eps, parse_scheme(o.scheme)), o.k + 1, eigen_options(o));
    std::ostringstream txt;
    write_support_summary(txt, sx);
    txt << "k relaxed postprocessed\n";
    const auto prec = txt.precision(10);
    for (int i = 0; i <= o.k; ++i)
        txt << i << ' ' << relaxed[static_cast<std::size_t>(i)] << ' ' << merged[static_cast<std::size_t>(i)] << '\n';
    txt.precision(prec);
    std::cout << txt.str();
    const auto path = fs::path(o.out_dir) / "postprocess.txt";
    open_out(path) << txt.str();
    man.output(path.string());
    man.write();
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Density eigenvalue optimization and bound checks"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&](CLI::App* c) {
        c->add_option("--out-dir", o.out_dir, "Directory for reports and the run manifest")->capture_default_str();
        c->add_option("--tol", o.tol, "Eigensolver relative tolerance")->capture_default_str();
    };
    const auto relax = [&](CLI::App* c) {
        c->add_option("--eps", o.eps, "Relaxation parameter (0: unrelaxed)")->capture_default_str();
        c->add_option("--scheme", o.scheme, "eps_eps2 | eps_eps | unrelaxed")->capture_default_str();
    };
    const auto optimization = [&](CLI::App* c) {
        c->add_option("--m", o.m, "Target mass")->capture_default_str();
        c->add_option("--alpha", o.alpha, "Mass penalty weight (0: automatic)")->capture_default_str();
        c->add_option("--sigma", o.sigma, "Cluster threshold")->capture_default_str();
        c->add_option("--beta", o.beta, "Cluster gap penalty")->capture_default_str();
        c->add_option("--mesh", o.mesh, "Cells per side of the unit square")->capture_default_str();
        c->add_option("--seeds", o.seeds, "Number of random starts")->capture_default_str();
        c->add_option("--seed", o.seed, "First seed")->capture_default_str();
        c->add_option("--max-iters", o.max_iters, "Iteration cap per phase")->capture_default_str();
        relax(c);
        common(c);
    };

    auto* eig = app.add_subcommand("eig", "Lowest eigenvalues of a density file");
    eig->add_option("file", o.input, "Density file")->required();
    eig->add_option("--k", o.k, "Highest index reported")->capture_default_str();
    relax(eig);
    common(eig);

    auto* spur = app.add_subcommand("spurious", "Spurious-mode table for the disk of radius 0.4");
    spur->add_option("--mesh", o.mesh, "Cells per side")->capture_default_str();
    common(spur);

    auto* opt = app.add_subcommand("optimize", "Maximize the normalized k-th eigenvalue");
    opt->add_option("--k", o.k, "Eigenvalue index")->capture_default_str();
    optimization(opt);

    auto* t2 = app.add_subcommand("table2", "Optimized values against the reference values");
    t2->add_option("--kmin", o.kmin, "First k")->capture_default_str();
    t2->add_option("--kmax", o.kmax, "Last k")->capture_default_str();
    t2->add_option("--from-dir", o.from_dir, "Read report_k<k>.json files instead of optimizing");
    optimization(t2);

    auto* audit = app.add_subcommand("audit-bounds", "Check mu_k against the proved upper bounds");
    audit->add_option("dir", o.input, "Directory of density files")->required();
    audit->add_option("--N", o.dimension, "Dimension of the densities (1 or 2)")->capture_default_str();
    audit->add_option("--kmax", o.kmax, "Highest k checked")->capture_default_str();
    audit->add_option("--eps", o.eps, "Relaxation for densities with zeros")->capture_default_str();
    common(audit);

    auto* exp = app.add_subcommand("export", "Export a 2D density as a CSV grid or a grayscale image");
    exp->add_option("file", o.input, "Density file")->required();
    exp->add_option("--format", o.format, "csv_grid | ppm")->capture_default_str();
    exp->add_option("--output", o.output, "Output path (default: <out-dir>/<stem>.csv|.pgm)");
    common(exp);

    auto* corpus = app.add_subcommand("make-corpus", "Write the built-in density corpus");
    corpus->add_option("dir", o.input, "Target directory (2d/ and 1d/ are created)")->required();
    corpus->add_option("--mesh", o.corpus_mesh, "Cells per side of the 2D grids")->capture_default_str();
    corpus->add_option("--cells-1d", o.cells_1d, "Cells of the 1D meshes")->capture_default_str();
    common(corpus);

    auto* post = app.add_subcommand("postprocess", "Support extraction and unrelaxed spectrum");
    post->add_option("file", o.input, "Density file")->required();
    post->add_option("--k", o.k, "Highest index reported")->capture_default_str();
    post->add_option("--tau", o.tau, "Support threshold")->capture_default_str();
    relax(post);
    common(post);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        fs::create_directories(o.out_dir);
        if (*eig) return cmd_eig(o);
        if (*spur) return cmd_spurious(o);
        if (*opt) return cmd_optimize(o);
        if (*t2) return cmd_table2(o);
        if (*audit) return cmd_audit(o);
        if (*exp) return cmd_export(o);
        if (*corpus) return cmd_make_corpus(o);
        if (*post) return cmd_postprocess(o);
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
