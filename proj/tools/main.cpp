// lcsync: minimum-time bang-bang synchronisation onto a Lienard limit cycle.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "artifacts.hpp"
#include "lcsync/errors.hpp"
#include "lcsync/oracle.hpp"
#include "lcsync/synthesis.hpp"

namespace fs = std::filesystem;
using namespace lcsync;
using namespace lcsync::cli;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCoverage = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitOracle = 5;

const char* const kPlus = "#d62728";
const char* const kMinus = "#1f77b4";

struct OracleDisagreement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string system = "vdp";
    double mu = 0.1;
    double K = 2.0;
    std::string region = "exterior";
    std::size_t n_anchors = 256;
    double rel = 1e-10;
    double abs = 1e-10;
    double t_tol = 1e-10;
    double event_tol = 1e-6;
    double delta = 0.0;
    double time_tie_tol = 1e-5;
    double feas_tol = 1e-4;
    double t_back_max = 150.0;
    std::size_t max_bangs = 64;
    std::string out_dir = ".";
    std::vector<std::string> formats{"csv", "json", "svg"};
    std::uint64_t seed = 1;
    unsigned jobs = 1;

    // limit-cycle
    std::size_t samples = 4096;
    std::string relax_x0 = "0.1,0";
    double relax_fraction = 0.01;
    // extremal
    double phase = -1.0;
    int sign = 0;
    std::string critical = "none";
    // field
    std::vector<std::string> queries;
    double view = 0.0;
    std::size_t plot_members = 48;
    std::size_t coexistence_grid = 32;
    // phase-diagram
    double K_min = 0.1;
    double K_max = 2.0;
    std::size_t K_steps = 20;
    double x_min = 0.0;
    double x_max = 0.0;
    std::size_t x_steps = 24;
    int n_max = 4;
    // min-time
    std::string x0 = "5,0";
    std::vector<double> K_grid;
    // critical-k
    int n = 1;
    double K_lo = 0.02;
    double K_hi = 2.5;
    double K_tol = 1e-4;
    // validate
    std::string points = "default";
    std::size_t random_points = 6;
    double agree_tol = 0.01;
    std::size_t oracle_bangs = 4;
    std::size_t oracle_starts = 32;
};

PhasePoint parse_point(const std::string& text)
{
    std::istringstream is(text);
    PhasePoint p;
    char comma = 0;
    if (!(is >> p.x1 >> comma >> p.x2) || comma != ',' || !(is >> std::ws).eof()) {
        throw DomainError("expected a point as 'x1,x2', got '" + text + "'");
    }
    return p;
}

std::vector<double> linspace(double a, double b, std::size_t n)
{
    if (n < 2) {
        throw DomainError("grids need at least 2 points");
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

std::string pattern_string(const BangSchedule& s)
{
    std::string out;
    for (int v : s.pattern()) {
        out += v > 0 ? '+' : '-';
    }
    return out;
}

ordered_json point_json(PhasePoint p)
{
    return ordered_json::array({p.x1, p.x2});
}

ordered_json schedule_json(const BangSchedule& s)
{
    return {{"t_f", s.t_f}, {"first_sign", s.first_sign}, {"switches", s.switches}, {"bangs", s.bangs()},
            {"pattern", pattern_string(s)}};
}

class Run {
public:
    Run(const RunConfig& cfg, std::string command, ordered_json options)
        : cfg_(cfg), sys_(LienardSystem::by_name(cfg.system, cfg.mu))
    {
        validate();
        ordered_json tol = {{"rel", cfg.rel},         {"abs", cfg.abs},           {"t_tol", cfg.t_tol},
                            {"event_tol", cfg.event_tol}, {"delta", cfg.delta}, {"time_tie_tol", cfg.time_tie_tol},
                            {"feas_tol", cfg.feas_tol}, {"t_back_max", cfg.t_back_max}, {"max_bangs", cfg.max_bangs}};
        header_.command = std::move(command);
        header_.tolerances = tol;
        ordered_json all = {{"command", header_.command}, {"system", cfg.system}, {"mu", cfg.mu},
                            {"tolerances", tol},           {"seed", cfg.seed},     {"options", options}};
        header_.config_hash = fnv1a_hex(all.dump());
        summary_ = {{"command", header_.command}, {"status", "ok"}, {"config_hash", header_.config_hash}};
    }

    const RunConfig& cfg() const { return cfg_; }
    const LienardSystem& sys() const { return sys_; }
    const RunHeader& header() const { return header_; }
    ordered_json& summary() { return summary_; }

    bool wants(const std::string& fmt) const
    {
        return std::find(cfg_.formats.begin(), cfg_.formats.end(), fmt) != cfg_.formats.end();
    }

    void emit(const std::string& name, const std::string& content)
    {
        const fs::path path = fs::path(cfg_.out_dir) / name;
        write_atomic(path, content);
        summary_["files"].push_back(path.string());
    }

    Tolerances tolerances() const
    {
        Tolerances t;
        t.rel = cfg_.rel;
        t.abs = cfg_.abs;
        t.t_tol = cfg_.t_tol;
        return t;
    }

    LimitCycleOptions cycle_options() const
    {
        LimitCycleOptions o;
        o.n_samples = cfg_.samples;
        o.integration = tolerances();
        return o;
    }

    std::shared_ptr<const LimitCycle> cycle() const
    {
        return std::make_shared<const LimitCycle>(LimitCycle::find(sys_, cycle_options()));
    }

    RewindOptions rewind() const
    {
        RewindOptions o;
        o.t_back_max = cfg_.t_back_max;
        o.max_bangs = cfg_.max_bangs;
        o.axis_tol = cfg_.event_tol;
        o.tol = tolerances();
        return o;
    }

    FieldOptions field() const
    {
        FieldOptions o;
        o.n_anchors = cfg_.n_anchors;
        o.rewind = rewind();
        o.time_tie_tol = cfg_.time_tie_tol;
        o.match_delta = cfg_.delta;
        o.jobs = cfg_.jobs;
        return o;
    }

private:
    void validate() const
    {
        const auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw DomainError(std::string(name) + " must be positive");
            }
        };
        positive(cfg_.mu, "mu");
        positive(cfg_.K, "K");
        positive(cfg_.rel, "rel");
        positive(cfg_.abs, "abs");
        positive(cfg_.t_tol, "t_tol");
        positive(cfg_.event_tol, "event_tol");
        positive(cfg_.time_tie_tol, "time_tie_tol");
        positive(cfg_.feas_tol, "feas_tol");
        positive(cfg_.t_back_max, "t_back_max");
        if (cfg_.delta < 0.0) {
            throw DomainError("delta must be non-negative");
        }
        for (const auto& f : cfg_.formats) {
            if (f != "csv" && f != "json" && f != "svg") {
                throw DomainError("unknown output format '" + f + "'");
            }
        }
        (void)region_from_string(cfg_.region);
    }

    RunConfig cfg_;
    LienardSystem sys_;
    RunHeader header_;
    ordered_json summary_;
};

std::vector<std::pair<double, double>> xy(const std::vector<PhasePoint>& pts)
{
    std::vector<std::pair<double, double>> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        out.emplace_back(p.x1, p.x2);
    }
    return out;
}

std::vector<std::pair<double, double>> closed(const LimitCycle& lc)
{
    auto pts = xy(lc.samples());
    pts.push_back(pts.front());
    return pts;
}

void add_arcs(CsvTable& csv, std::size_t traj_id, const ExtremalTrajectory& tr, double K)
{
    for (std::size_t a = 0; a < tr.arcs.size(); ++a) {
        const Arc& arc = tr.arcs[a];
        for (const Sample& s : arc.samples) {
            csv.row({std::to_string(traj_id), std::to_string(a), num(s.t), num(s.y[0]), num(s.y[1]), num(s.y[2]),
                     num(s.y[3]), num(arc.sign * K)});
        }
    }
}

void plot_arcs(SvgPlot& svg, const ExtremalTrajectory& tr, double width = 0.8)
{
    for (const Arc& arc : tr.arcs) {
        std::vector<std::pair<double, double>> pts;
        for (const Sample& s : arc.samples) {
            pts.emplace_back(s.y[0], s.y[1]);
        }
        svg.polyline(pts, arc.sign > 0 ? kPlus : kMinus, width);
    }
}

ordered_json trajectory_json(const LienardSystem& sys, const ExtremalTrajectory& tr)
{
    ordered_json switches = ordered_json::array();
    for (const auto& s : tr.switch_states) {
        switches.push_back({{"x", point_json(s.x)}, {"p1", s.p1}, {"p2", s.p2}});
    }
    return {{"anchor", point_json(tr.anchor)},
            {"anchor_phase", tr.anchor_phase},
            {"region", to_string(tr.region)},
            {"K", tr.K},
            {"p0", tr.p0},
            {"termination", to_string(tr.termination)},
            {"duration", tr.duration()},
            {"schedule", schedule_json(tr.schedule)},
            {"switch_states", switches},
            {"max_abs_hamiltonian", tr.max_abs_hamiltonian(sys)}};
}

// ---------------------------------------------------------------- commands

void cmd_limit_cycle(Run& run)
{
    const auto& cfg = run.cfg();
    const auto report = check_lienard_conditions(run.sys(), linspace(1e-3, 6.0, 600));
    const auto lc = run.cycle();
    const PhasePoint seed = parse_point(cfg.relax_x0);
    const double t_relax = relaxation_time(run.sys(), *lc, seed, cfg.relax_fraction);

    if (run.wants("csv")) {
        CsvTable csv(run.header(), {"t", "x1", "x2"});
        const auto& samples = lc->samples();
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const double t = lc->period() * static_cast<double>(k) / static_cast<double>(samples.size());
            csv.row({num(t), num(samples[k].x1), num(samples[k].x2)});
        }
        run.emit("limit_cycle.csv", csv.str());
    }
    ordered_json body = {{"system", run.sys().name},
                         {"mu", run.sys().mu},
                         {"x_max", lc->x_max()},
                         {"period", lc->period()},
                         {"resolution", lc->resolution()},
                         {"max_chord", lc->max_chord()},
                         {"n_samples", lc->samples().size()},
                         {"relaxation", {{"x0", point_json(seed)}, {"fraction", cfg.relax_fraction}, {"time", t_relax}}},
                         {"lienard_conditions",
                          {{"passed", report.passed()},
                           {"zero_of_potential_integral", report.zero},
                           {"checked_up_to", report.checked_up_to},
                           {"diagnostics", report.diagnostics}}}};
    if (run.wants("json")) {
        run.emit("limit_cycle.json", json_document(run.header(), body).dump(2) + "\n");
    }
    if (run.wants("svg")) {
        const double r = lc->x_max() * 1.3;
        SvgPlot svg(run.header(), {-r, r, -r, r}, "x1", "x2", "limit cycle");
        svg.polyline(closed(*lc), "black", 1.5);
        svg.marker(lc->x_max(), 0.0, "black");
        svg.marker(-lc->x_max(), 0.0, "black");
        run.emit("limit_cycle.svg", svg.str());
    }
    run.summary()["x_max"] = lc->x_max();
    run.summary()["period"] = lc->period();
    run.summary()["relaxation_time"] = t_relax;
}

void cmd_extremal(Run& run)
{
    const auto& cfg = run.cfg();
    const auto lc = run.cycle();
    const Region region = region_from_string(cfg.region);
    const ForceBound bound(cfg.K);
    auto ro = run.rewind();
    ro.record_axis_crossings = true;

    std::vector<ExtremalTrajectory> trajs;
    if (cfg.critical != "none") {
        if (cfg.critical != "left" && cfg.critical != "right") {
            throw DomainError("--critical must be left, right or none");
        }
        const auto side = cfg.critical == "left" ? CriticalSide::left : CriticalSide::right;
        trajs.push_back(critical_trajectory(run.sys(), *lc, side, bound, region, ro));
    } else {
        const double phase = cfg.phase < 0.0 ? 0.25 * lc->period() : cfg.phase;
        const PhasePoint xf = lc->point_at(phase);
        std::vector<int> signs;
        if (cfg.sign == 0) {
            signs = final_bang_sign(run.sys(), *lc, xf, region, bound, ro.snap_distance);
        } else if (cfg.sign == 1 || cfg.sign == -1) {
            signs = {cfg.sign};
        } else {
            throw DomainError("--sign must be -1, 0 or 1");
        }
        if (signs.empty()) {
            throw DomainError("no admissible final bang at this anchor");
        }
        for (int s : signs) {
            trajs.push_back(rewind_from_phase(run.sys(), *lc, phase, s, bound, region, ro));
        }
    }

    if (run.wants("csv")) {
        CsvTable csv(run.header(), {"traj_id", "arc_id", "t", "x1", "x2", "p1", "p2", "F"});
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            add_arcs(csv, i, trajs[i], cfg.K);
        }
        run.emit("extremal_arcs.csv", csv.str());
    }
    ordered_json list = ordered_json::array();
    for (const auto& tr : trajs) {
        auto j = trajectory_json(run.sys(), tr);
        if (tr.kind != TrajectoryKind::generic) {
            j["axis_crossings"] = axis_crossings(tr);
        }
        list.push_back(j);
    }
    if (run.wants("json")) {
        run.emit("extremal.json", json_document(run.header(), {{"trajectories", list}}).dump(2) + "\n");
    }
    if (run.wants("svg")) {
        const double r = std::max(6.0, lc->x_max() * 1.5);
        SvgPlot svg(run.header(), {-r, r, -r, r}, "x1", "x2", "extremal, K = " + num(cfg.K));
        svg.polyline(closed(*lc), "black", 1.5);
        for (const auto& tr : trajs) {
            plot_arcs(svg, tr, 1.4);
        }
        svg.legend("F = +K", kPlus);
        svg.legend("F = -K", kMinus);
        run.emit("extremal.svg", svg.str());
    }
    run.summary()["trajectories"] = trajs.size();
    run.summary()["bangs"] = trajs.front().schedule.bangs();
}

void cmd_field(Run& run)
{
    const auto& cfg = run.cfg();
    const auto lc = run.cycle();
    const Region region = region_from_string(cfg.region);
    const auto field = SynthesisField::build(run.sys(), lc, ForceBound(cfg.K), region, run.field());
    const auto sw = switching_curves(field);
    std::optional<CoexistenceCurve> bc;
    if (region == Region::interior) {
        CoexistenceOptions co;
        co.grid = cfg.coexistence_grid;
        bc = coexistence_curve(field, co);
    }

    std::vector<Polyline> curves;
    curves.push_back({"cycle", lc->samples()});
    curves.push_back(sw.plus);
    curves.push_back(sw.minus);
    for (const auto& b : sw.branches) {
        curves.push_back(b);
    }
    if (bc) {
        for (const auto& b : bc->branches) {
            curves.push_back(b);
        }
    }

    if (run.wants("csv")) {
        CsvTable arcs(run.header(), {"traj_id", "arc_id", "t", "x1", "x2", "p1", "p2", "F"});
        for (std::size_t i = 0; i < field.extremals().size(); ++i) {
            add_arcs(arcs, i, field.extremals()[i], cfg.K);
        }
        run.emit("field_arcs.csv", arcs.str());
        CsvTable cur(run.header(), {"curve_id", "x1", "x2"});
        for (const auto& c : curves) {
            for (const auto& p : c.points) {
                cur.row({c.id, num(p.x1), num(p.x2)});
            }
        }
        run.emit("field_curves.csv", cur.str());
    }

    ordered_json answers = ordered_json::array();
    CsvTable qcsv(run.header(), {"x1", "x2", "t_f", "bangs", "pattern", "candidates", "degenerate"});
    for (const auto& q : cfg.queries) {
        const PhasePoint x0 = parse_point(q);
        const auto ans = field.optimal_for_point(x0);
        answers.push_back({{"x0", point_json(x0)},
                           {"t_f", ans.t_f},
                           {"schedule", schedule_json(ans.schedule)},
                           {"x0_snap", point_json(ans.x0_snap)},
                           {"candidates", ans.candidates},
                           {"degenerate", ans.degenerate}});
        qcsv.row({num(x0.x1), num(x0.x2), num(ans.t_f), std::to_string(ans.schedule.bangs()),
                  pattern_string(ans.schedule), std::to_string(ans.candidates), ans.degenerate ? "1" : "0"});
    }
    if (!cfg.queries.empty() && run.wants("csv")) {
        run.emit("field_queries.csv", qcsv.str());
    }

    ordered_json criticals = ordered_json::array();
    for (const auto& c : field.criticals()) {
        criticals.push_back({{"anchor", point_json(c.anchor)},
                             {"final_sign", c.arcs.back().sign},
                             {"axis_crossings", axis_crossings(c)},
                             {"termination", to_string(c.termination)}});
    }
    std::map<std::string, std::size_t> patterns;
    for (const auto& sh : field.sheets()) {
        for (std::size_t m : sh.members) {
            ++patterns[pattern_string(field.extremals()[m].schedule)];
        }
    }
    ordered_json body = {{"K", cfg.K},
                         {"region", to_string(region)},
                         {"extremals", field.extremals().size()},
                         {"pruned", field.pruned().size()},
                         {"max_anchor_gap", field.max_anchor_gap()},
                         {"extremal_patterns", patterns},
                         {"criticals", criticals},
                         {"switching_curves", {{"S+", sw.plus.points.size()}, {"S-", sw.minus.points.size()}}},
                         {"queries", answers}};
    if (bc) {
        body["coexistence"] = {{"branches", bc->branches.size()},
                               {"max_time_gap", bc->max_time_gap},
                               {"diagnostic", bc->diagnostic}};
    }
    if (run.wants("json")) {
        run.emit("field.json", json_document(run.header(), body).dump(2) + "\n");
    }
    if (run.wants("svg")) {
        const double r = cfg.view > 0.0 ? cfg.view : (region == Region::exterior ? 6.0 : lc->x_max() * 1.25);
        SvgPlot svg(run.header(), {-r, r, -r, r}, "x1", "x2",
                    std::string(region == Region::exterior ? "exterior" : "interior") + " field, K = " + num(cfg.K));
        for (const auto& sh : field.sheets()) {
            const std::size_t stride = std::max<std::size_t>(1, sh.members.size() / std::max<std::size_t>(1, cfg.plot_members));
            for (std::size_t i = 0; i < sh.members.size(); i += stride) {
                plot_arcs(svg, field.extremals()[sh.members[i]], 0.6);
            }
        }
        for (const auto& c : field.criticals()) {
            plot_arcs(svg, c, 2.0);
        }
        svg.polyline(closed(*lc), "black", 1.8);
        for (const auto& b : sw.branches) {
            svg.polyline(xy(b.points), "#2ca02c", 1.6);
        }
        if (bc) {
            for (const auto& b : bc->branches) {
                svg.polyline(xy(b.points), "black", 1.6, "6,4");
            }
        }
        svg.legend("F = +K", kPlus);
        svg.legend("F = -K", kMinus);
        svg.legend("switching curves", "#2ca02c");
        if (bc) {
            svg.legend("coexistence", "black", "6,4");
        }
        run.emit("field.svg", svg.str());
    }
    run.summary()["extremals"] = field.extremals().size();
    run.summary()["queries"] = answers;
}

std::vector<double> x10_grid(const RunConfig& cfg, const LimitCycle& lc, Region region)
{
    double lo = cfg.x_min, hi = cfg.x_max;
    if (region == Region::exterior) {
        lo = lo > 0.0 ? lo : lc.x_max() + 0.05;
        hi = hi > 0.0 ? hi : 6.0;
    } else {
        lo = lo > 0.0 ? lo : 0.05;
        hi = hi > 0.0 ? hi : lc.x_max() - 0.05;
    }
    return linspace(lo, hi, cfg.x_steps);
}

void cmd_phase_diagram(Run& run)
{
    const auto& cfg = run.cfg();
    const auto lc = run.cycle();
    const Region region = region_from_string(cfg.region);
    const auto Ks = linspace(cfg.K_min, cfg.K_max, cfg.K_steps);
    const auto xs = x10_grid(cfg, *lc, region);
    const auto pd = phase_diagram(run.sys(), lc, region, Ks, xs, run.field(), cfg.n_max);

    if (run.wants("csv")) {
        CsvTable csv(run.header(), {"K", "x10", "bangs"});
        for (std::size_t i = 0; i < Ks.size(); ++i) {
            for (std::size_t j = 0; j < xs.size(); ++j) {
                csv.row({num(Ks[i]), num(xs[j]), std::to_string(pd.bangs[i][j])});
            }
        }
        run.emit("phase_diagram.csv", csv.str());
        CsvTable cur(run.header(), {"curve_id", "K", "x10"});
        for (const auto& c : pd.curves) {
            for (const auto& [K, x] : c.points) {
                cur.row({"x" + std::to_string(c.n), num(K), num(x)});
            }
        }
        run.emit("critical_curves.csv", cur.str());
    }
    ordered_json curves = ordered_json::array();
    for (const auto& c : pd.curves) {
        ordered_json pts = ordered_json::array();
        for (const auto& [K, x] : c.points) {
            pts.push_back({K, x});
        }
        curves.push_back({{"n", c.n}, {"points", pts}});
    }
    if (run.wants("json")) {
        run.emit("phase_diagram.json",
                 json_document(run.header(), {{"region", to_string(region)},
                                              {"K_grid", Ks},
                                              {"x10_grid", xs},
                                              {"bangs", pd.bangs},
                                              {"critical_curves", curves},
                                              {"diagnostics", pd.diagnostics}})
                         .dump(2) +
                     "\n");
    }
    if (run.wants("svg")) {
        const double dK = (Ks.back() - Ks.front()) / static_cast<double>(Ks.size() - 1);
        const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
        SvgPlot svg(run.header(), {Ks.front() - dK / 2, Ks.back() + dK / 2, xs.front() - dx / 2, xs.back() + dx / 2},
                    "K", "x10", std::string(region == Region::exterior ? "exterior" : "interior") + " bang count");
        const char* shades[] = {"#ffffff", "#fde0c5", "#facba6", "#f8b58b", "#f59e72", "#f2855d", "#ef6a4c", "#eb4a40"};
        for (std::size_t i = 0; i < Ks.size(); ++i) {
            for (std::size_t j = 0; j < xs.size(); ++j) {
                const int b = std::clamp(pd.bangs[i][j], 0, 7);
                svg.rect(Ks[i] - dK / 2, xs[j] - dx / 2, Ks[i] + dK / 2, xs[j] + dx / 2, shades[b]);
            }
        }
        for (const auto& c : pd.curves) {
            std::vector<std::pair<double, double>> pts(c.points.begin(), c.points.end());
            svg.polyline(pts, "black", 1.6);
        }
        svg.legend("critical curves", "black");
        run.emit("phase_diagram.svg", svg.str());
    }
    std::size_t missing = 0;
    for (const auto& row : pd.bangs) {
        missing += static_cast<std::size_t>(std::count(row.begin(), row.end(), 0));
    }
    run.summary()["cells"] = Ks.size() * xs.size();
    run.summary()["missing_cells"] = missing;
}

void cmd_min_time(Run& run)
{
    const auto& cfg = run.cfg();
    const auto lc = run.cycle();
    const PhasePoint x0 = parse_point(cfg.x0);
    const auto Ks = cfg.K_grid.empty() ? linspace(cfg.K_min, cfg.K_max, cfg.K_steps) : cfg.K_grid;
    MinTimeOptions mo;
    mo.field = run.field();
    mo.continuity_tol = cfg.time_tie_tol;
    const auto curve = min_time_curve(run.sys(), lc, x0, Ks, mo);

    if (run.wants("csv")) {
        CsvTable csv(run.header(), {"K", "t_f", "bangs"});
        for (const auto& p : curve.points) {
            csv.row({num(p.K), num(p.t_f), std::to_string(p.bangs)});
        }
        run.emit("min_time.csv", csv.str());
    }
    ordered_json pts = ordered_json::array();
    for (const auto& p : curve.points) {
        pts.push_back({{"K", p.K}, {"t_f", p.t_f}, {"bangs", p.bangs}});
    }
    ordered_json kinks = ordered_json::array();
    for (const auto& k : curve.kinks) {
        kinks.push_back({{"K", k.K},
                         {"bracket", k.bracket},
                         {"t_left", k.t_left},
                         {"t_right", k.t_right},
                         {"bangs_left", k.bangs_left},
                         {"bangs_right", k.bangs_right}});
    }
    if (run.wants("json")) {
        run.emit("min_time.json", json_document(run.header(), {{"x0", point_json(x0)},
                                                                {"region", to_string(curve.region)},
                                                                {"points", pts},
                                                                {"kinks", kinks},
                                                                {"truncated", curve.truncated},
                                                                {"diagnostic", curve.diagnostic}})
                                          .dump(2) +
                                      "\n");
    }
    if (run.wants("svg") && curve.points.size() >= 2) {
        double lo = curve.points.front().t_f, hi = lo;
        std::vector<std::pair<double, double>> line;
        for (const auto& p : curve.points) {
            lo = std::min(lo, p.t_f);
            hi = std::max(hi, p.t_f);
            line.emplace_back(p.K, p.t_f);
        }
        const double pad = 0.05 * (hi - lo + 1e-9);
        SvgPlot svg(run.header(), {curve.points.front().K, curve.points.back().K, lo - pad, hi + pad}, "K", "t_f",
                    "minimum connection time from (" + num(x0.x1) + ", " + num(x0.x2) + ")");
        for (const auto& k : curve.kinks) {
            svg.vertical(k.K, "#7f7f7f");
        }
        svg.polyline(line, "black", 1.6);
        for (const auto& p : curve.points) {
            svg.marker(p.K, p.t_f, "black", 2.0);
        }
        svg.legend("kinks", "#7f7f7f", "4,3");
        run.emit("min_time.svg", svg.str());
    }
    run.summary()["points"] = curve.points.size();
    run.summary()["kinks"] = kinks;
    run.summary()["truncated"] = curve.truncated;
    if (curve.truncated) {
        run.summary()["diagnostic"] = curve.diagnostic;
    }
}

void cmd_critical_k(Run& run)
{
    const auto& cfg = run.cfg();
    const auto lc = run.cycle();
    const Region region = region_from_string(cfg.region);
    if (!(cfg.K_lo > 0.0) || !(cfg.K_hi > cfg.K_lo)) {
        throw DomainError("critical-k needs 0 < K_lo < K_hi");
    }
    const auto ro = run.rewind();
    // Scan a geometric grid from the top for the first K whose count reaches n.
    const std::size_t scan = 48;
    double hi = cfg.K_hi;
    double lo = 0.0;
    for (std::size_t i = 1; i < scan; ++i) {
        const double K = cfg.K_hi * std::pow(cfg.K_lo / cfg.K_hi, static_cast<double>(i) / (scan - 1));
        const int count = static_cast<int>(critical_crossings(run.sys(), *lc, region, ForceBound(K), ro).size());
        if (count >= cfg.n) {
            lo = K;
            break;
        }
        hi = K;
    }
    if (lo == 0.0) {
        std::ostringstream os;
        os << "the critical trajectory never reaches " << cfg.n << " axis crossings for K in [" << cfg.K_lo << ", "
           << cfg.K_hi << "]";
        throw DomainError(os.str());
    }
    const double Kc = critical_K(run.sys(), *lc, cfg.n, region, lo, hi, cfg.K_tol, ro);
    ordered_json body = {{"n", cfg.n}, {"region", to_string(region)}, {"K_c", Kc}, {"tolerance", cfg.K_tol},
                         {"bracket", {lo, hi}}};
    if (run.wants("json")) {
        run.emit("critical_k.json", json_document(run.header(), body).dump(2) + "\n");
    }
    run.summary()["K_c"] = Kc;
}

std::vector<PhasePoint> validation_points(const RunConfig& cfg, const LimitCycle& lc)
{
    std::vector<PhasePoint> pts;
    if (cfg.points != "default") {
        std::istringstream is(cfg.points);
        std::string item;
        while (std::getline(is, item, ';')) {
            pts.push_back(parse_point(item));
        }
        return pts;
    }
    pts = {{5.0, 0.0}, {1.0, 0.0}};
    std::mt19937_64 rng(cfg.seed);
    auto u = [&rng](double a, double b) { return a + (b - a) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::size_t ext = 0, in = 0;
    while (ext < cfg.random_points || in < cfg.random_points) {
        const PhasePoint p{u(-5.0, 5.0), u(-5.0, 5.0)};
        const double chi = lc.chi(p);
        if (chi > 0.3 && chi < 3.0 && ext < cfg.random_points) {
            pts.push_back(p);
            ++ext;
        } else if (chi < -0.15 && in < cfg.random_points) {
            pts.push_back(p);
            ++in;
        }
    }
    return pts;
}

void cmd_validate(Run& run)
{
    const auto& cfg = run.cfg();
    const auto lc = run.cycle();
    const auto pts = validation_points(cfg, *lc);
    const ForceBound bound(cfg.K);
    std::map<Region, std::unique_ptr<SynthesisField>> fields;
    OracleOptions oo;
    oo.max_bangs = cfg.oracle_bangs;
    oo.starts = cfg.oracle_starts;
    oo.feas_tol = cfg.feas_tol;
    oo.seed = cfg.seed;

    CsvTable csv(run.header(), {"x1", "x2", "region", "t_synthesis", "bangs_synthesis", "t_oracle", "bangs_oracle",
                                "rel_diff", "agree"});
    ordered_json rows = ordered_json::array();
    std::size_t failures = 0;
    for (const auto& p : pts) {
        const Region region = lc->chi(p) > 0.0 ? Region::exterior : Region::interior;
        auto& f = fields[region];
        if (!f) {
            f = std::make_unique<SynthesisField>(SynthesisField::build(run.sys(), lc, bound, region, run.field()));
        }
        const auto ans = f->optimal_for_point(p);
        const auto orc = direct_min_time(run.sys(), *lc, p, bound, oo);
        const double rel = orc.feasible ? std::abs(ans.t_f - orc.t_f) / std::max(ans.t_f, 1e-12) : INFINITY;
        const bool ok = orc.feasible && rel <= cfg.agree_tol && ans.schedule.bangs() == orc.schedule.bangs();
        failures += ok ? 0 : 1;
        csv.row({num(p.x1), num(p.x2), to_string(region), num(ans.t_f), std::to_string(ans.schedule.bangs()),
                 num(orc.t_f), std::to_string(orc.schedule.bangs()), num(rel), ok ? "1" : "0"});
        rows.push_back({{"x0", point_json(p)},
                        {"region", to_string(region)},
                        {"synthesis", schedule_json(ans.schedule)},
                        {"oracle", schedule_json(orc.schedule)},
                        {"oracle_feasible", orc.feasible},
                        {"rel_diff", rel},
                        {"agree", ok}});
    }
    if (run.wants("csv")) {
        run.emit("validate.csv", csv.str());
    }
    if (run.wants("json")) {
        run.emit("validate.json", json_document(run.header(), {{"K", cfg.K},
                                                                {"tolerance", cfg.agree_tol},
                                                                {"points", rows},
                                                                {"failures", failures}})
                                          .dump(2) +
                                      "\n");
    }
    run.summary()["points"] = pts.size();
    run.summary()["failures"] = failures;
    if (failures > 0) {
        throw OracleDisagreement(std::to_string(failures) + " point(s) disagree with the direct oracle");
    }
}

void print_error(const std::string& command, const std::string& category, const std::string& message)
{
    ordered_json j = {{"command", command}, {"status", "error"}, {"category", category}, {"message", message}};
    std::cout << j.dump() << std::endl;
    std::cerr << "lcsync: " << message << std::endl;
}

}  // namespace

int main(int argc, char** argv)
{
    RunConfig cfg;
    CLI::App app{"Minimum-time bang-bang synchronisation onto the limit cycle of a Lienard oscillator"};
    app.set_config("--config", "", "TOML configuration file (command-line flags override it)");
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--system", cfg.system, "Lienard system")->check(CLI::IsMember({"vdp"}));
    app.add_option("--mu", cfg.mu, "damping parameter");
    app.add_option("--K", cfg.K, "force bound");
    app.add_option("--region", cfg.region, "exterior or interior")->check(CLI::IsMember({"exterior", "interior"}));
    app.add_option("--n-anchors", cfg.n_anchors, "anchors on the cycle per field");
    app.add_option("--rel", cfg.rel, "relative integration tolerance");
    app.add_option("--abs", cfg.abs, "absolute integration tolerance");
    app.add_option("--t-tol", cfg.t_tol, "event time tolerance");
    app.add_option("--event-tol", cfg.event_tol, "on-axis tolerance for critical switches");
    app.add_option("--delta", cfg.delta, "extra matching slack for field queries");
    app.add_option("--time-tie-tol", cfg.time_tie_tol, "time difference below which candidates tie");
    app.add_option("--feas-tol", cfg.feas_tol, "oracle terminal |chi| tolerance");
    app.add_option("--t-back-max", cfg.t_back_max, "backward horizon");
    app.add_option("--max-bangs", cfg.max_bangs, "bang limit for backward integration");
    app.add_option("--out", cfg.out_dir, "output directory")->envname("LCSYNC_OUT");
    app.add_option("--formats", cfg.formats, "subset of csv json svg")->delimiter(',');
    app.add_option("--seed", cfg.seed, "seed for random points and oracle starts");
    app.add_option("--jobs", cfg.jobs, "worker threads for field construction");

    auto* lc_cmd = app.add_subcommand("limit-cycle", "locate the limit cycle");
    lc_cmd->add_option("--samples", cfg.samples, "polyline samples");
    lc_cmd->add_option("--relax-x0", cfg.relax_x0, "start point for the relaxation time");
    lc_cmd->add_option("--relax-fraction", cfg.relax_fraction, "band half-width as a fraction of x_max");

    auto* ex_cmd = app.add_subcommand("extremal", "rewind one extremal");
    ex_cmd->add_option("--phase,--anchor-angle", cfg.phase, "anchor phase from the rightmost point (default T/4)");
    ex_cmd->add_option("--sign", cfg.sign, "last bang sign, 0 for every admissible one");
    ex_cmd->add_option("--critical,--side", cfg.critical, "left, right or none");

    auto* fd_cmd = app.add_subcommand("field", "build the field of extremals");
    fd_cmd->add_option("--query", cfg.queries, "initial point 'x1,x2' to solve (repeatable)");
    fd_cmd->add_option("--view", cfg.view, "half-width of the plotted window");
    fd_cmd->add_option("--plot-members", cfg.plot_members, "extremals per sheet drawn in the SVG");
    fd_cmd->add_option("--coexistence-grid", cfg.coexistence_grid, "grid for the coexistence curve");

    auto* pd_cmd = app.add_subcommand("phase-diagram", "bang counts on the x1-axis over K");
    pd_cmd->add_option("--K-min", cfg.K_min, "smallest K");
    pd_cmd->add_option("--K-max", cfg.K_max, "largest K");
    pd_cmd->add_option("--K-steps", cfg.K_steps, "number of K values");
    pd_cmd->add_option("--x-min", cfg.x_min, "smallest x10 (default just past the cycle)");
    pd_cmd->add_option("--x-max", cfg.x_max, "largest x10");
    pd_cmd->add_option("--x-steps", cfg.x_steps, "number of x10 values");
    pd_cmd->add_option("--n-max", cfg.n_max, "critical curves to trace");

    auto* mt_cmd = app.add_subcommand("min-time", "minimum connection time against K");
    mt_cmd->add_option("--x0", cfg.x0, "initial point 'x1,x2'");
    mt_cmd->add_option("--K-min", cfg.K_min, "smallest K");
    mt_cmd->add_option("--K-max", cfg.K_max, "largest K");
    mt_cmd->add_option("--K-steps", cfg.K_steps, "number of K values");
    mt_cmd->add_option("--K-grid", cfg.K_grid, "explicit K values")->delimiter(',');

    auto* ck_cmd = app.add_subcommand("critical-k", "K at which the critical trajectory gains its n-th crossing");
    ck_cmd->add_option("--n", cfg.n, "crossing count")->check(CLI::PositiveNumber);
    ck_cmd->add_option("--K-lo", cfg.K_lo, "lower end of the bracket");
    ck_cmd->add_option("--K-hi", cfg.K_hi, "upper end of the bracket");
    ck_cmd->add_option("--K-tol", cfg.K_tol, "bisection tolerance in K");

    auto* va_cmd = app.add_subcommand("validate", "compare the synthesis with the direct oracle");
    va_cmd->add_option("--points", cfg.points, "'default' or 'x1,x2;x1,x2;...'");
    va_cmd->add_option("--random", cfg.random_points, "random points per region");
    va_cmd->add_option("--agree-tol", cfg.agree_tol, "relative time tolerance");
    va_cmd->add_option("--oracle-bangs", cfg.oracle_bangs, "largest bang count tried by the oracle");
    va_cmd->add_option("--oracle-starts", cfg.oracle_starts, "random restarts per bang count");

    std::string command = "lcsync";
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error(command, "config", e.what());
        return kExitConfig;
    }

    CLI::App* sub = app.get_subcommands().front();
    command = sub->get_name();
    ordered_json options;
    for (const CLI::Option* opt : sub->get_options()) {
        if (opt->get_name() != "--help" && opt->count() > 0) {
            options[opt->get_name()] = opt->as<std::string>();
        }
    }
    for (const CLI::Option* opt : app.get_options()) {
        const auto name = opt->get_name();
        if (name != "--help" && name != "--config" && name != "--out" && name != "--jobs" && opt->count() > 0) {
            options[name] = opt->as<std::string>();
        }
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        Run run(cfg, command, options);
        static const std::map<std::string, void (*)(Run&)> table = {
            {"limit-cycle", cmd_limit_cycle}, {"extremal", cmd_extremal},     {"field", cmd_field},
            {"phase-diagram", cmd_phase_diagram}, {"min-time", cmd_min_time}, {"critical-k", cmd_critical_k},
            {"validate", cmd_validate}};
        try {
            table.at(command)(run);
        } catch (const OracleDisagreement& e) {
            run.summary()["status"] = "error";
            run.summary()["category"] = "oracle";
            run.summary()["message"] = e.what();
            std::cout << run.summary().dump() << std::endl;
            std::cerr << "lcsync: " << e.what() << std::endl;
            return kExitOracle;
        }
        run.summary()["elapsed_s"] =
            std::round(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() * 1000) / 1000;
        std::cout << run.summary().dump() << std::endl;
        return 0;
    } catch (const DomainError& e) {
        print_error(command, "config", e.what());
        return kExitConfig;
    } catch (const CoverageError& e) {
        print_error(command, "coverage", e.what());
        return kExitCoverage;
    } catch (const NumericalError& e) {
        print_error(command, "numerical", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        print_error(command, "internal", e.what());
        return 1;
    }
}
