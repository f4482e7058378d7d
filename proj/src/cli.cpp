#include "aras/cli.hpp"

#include "aras/report.hpp"
#include "aras/scheduler.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

namespace aras
{

namespace
{

namespace fs = std::filesystem;

struct CommonArgs
{
    std::string network;
    std::string config;
    std::string out_dir = "aras_out";
    std::vector<int> centers;
    double clip_threshold = 0.001;
    std::uint64_t seed = 0;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& a)
{
    cmd->add_option("--network", a.network, "Network description (JSON)")->required();
    cmd->add_option("--config", a.config,
                    fmt::format("Accelerator config (JSON); defaults to ${} or the built-in defaults", config_env_var));
    cmd->add_option("--out", a.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--centers", a.centers, "Candidate centers, comma separated")->delimiter(',');
    cmd->add_option("--clip-threshold", a.clip_threshold, "Largest tolerated per-layer clip fraction")
        ->capture_default_str();
    cmd->add_option("--seed", a.seed, "Offset added to every weight generator seed")->capture_default_str();
    cmd->add_option("--jobs", a.jobs, "Variants simulated concurrently")->capture_default_str()->check(CLI::PositiveNumber);
}

ValidatedConfig load_validated_config(const std::string& path)
{
    std::string p = path;
    if (p.empty())
        if (const char* env = std::getenv(config_env_var); env && *env)
            p = env;
    if (p.empty())
        return default_config();
    try
    {
        return validate_config(load_config(p));
    }
    catch (const Error& e)
    {
        if (std::string(e.what()).find(p) != std::string::npos)
            throw;
        throw Error(fmt::format("{}: {}", p, e.what()));
    }
}

struct Inputs
{
    NetworkModel network;
    ValidatedConfig config;
    RunOptions run;
};

Inputs load_inputs(const CommonArgs& a)
{
    LoadOptions lo;
    lo.seed_offset = a.seed;
    Inputs in{load_network(a.network, lo), load_validated_config(a.config), {}};
    check_compatible(in.network, in.config);
    in.run.clip_threshold = a.clip_threshold;
    if (!a.centers.empty())
        in.run.centers = a.centers;
    return in;
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(fmt::format("cannot write {}", path.string()));
    f << text;
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(fmt::format("cannot write {}", path.string()));
    fn(f);
}

/// Runs one variant and writes its traces into dir (if non-empty).
RunReport execute(Variant v, const Inputs& in, Cycles lower_bound, const fs::path& dir)
{
    RunOutput o = run_variant(v, in.network, in.config, in.run, !dir.empty());
    RunReport r = make_report(in.network.name, o.schedule, o.result.metrics, lower_bound);
    r.write_latency_mode = to_string(in.config->write_latency_mode);
    if (!dir.empty())
    {
        fs::create_directories(dir);
        write_stream(dir / "schedule.trace", [&](std::ostream& f) { export_schedule_trace(o.schedule, f); });
        write_stream(dir / "timeline.trace", [&](std::ostream& f) { export_timed_trace(o.schedule, o.result, f); });
    }
    return r;
}

std::vector<RunReport> execute_all(const std::vector<Variant>& variants, const Inputs& in, Cycles lower_bound,
                                   const std::vector<fs::path>& dirs, int jobs)
{
    std::vector<RunReport> reports(variants.size());
    std::vector<std::exception_ptr> errors(variants.size());
    auto work = [&](std::size_t i) {
        try
        {
            reports[i] = execute(variants[i], in, lower_bound, dirs[i]);
        }
        catch (...)
        {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t width = std::max<std::size_t>(1, static_cast<std::size_t>(jobs));
    for (std::size_t begin = 0; begin < variants.size(); begin += width)
    {
        std::vector<std::thread> pool;
        const std::size_t end = std::min(variants.size(), begin + width);
        for (std::size_t i = begin; i < end; ++i)
        {
            if (width == 1)
                work(i);
            else
                pool.emplace_back(work, i);
        }
        for (std::thread& t : pool)
            t.join();
    }
    for (const std::exception_ptr& e : errors)
        if (e)
            std::rethrow_exception(e);
    return reports;
}

int cmd_simulate(const CommonArgs& a, const std::string& variant_name, const std::string& baseline_name,
                 std::ostream& out)
{
    const Inputs in = load_inputs(a);
    const Variant v = parse_variant(variant_name);
    const Variant base = parse_variant(baseline_name);
    const Cycles lb = lower_bound_makespan(in.network, in.config);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);

    std::vector<Variant> variants = {v};
    std::vector<fs::path> dirs = {dir};
    if (base != v)
    {
        variants.push_back(base);
        dirs.emplace_back();
    }
    std::vector<RunReport> reports = execute_all(variants, in, lb, dirs, a.jobs);
    normalize_reports(reports, variant_label(base));
    write_file(dir / "report.txt", format_report(reports.front()));
    write_file(dir / "metrics.csv", format_csv(reports));
    out << format_comparison_table(reports);
    fmt::print(out, "report written to {}\n", (dir / "report.txt").string());
    return 0;
}

int cmd_compare(const CommonArgs& a, const std::vector<std::string>& names, const std::string& baseline_name,
                std::ostream& out)
{
    if (names.size() < 2)
        throw Error("compare needs at least two variants");
    const Inputs in = load_inputs(a);
    std::vector<Variant> variants;
    for (const std::string& n : names)
        variants.push_back(parse_variant(n));
    const Variant base = baseline_name.empty() ? variants.front() : parse_variant(baseline_name);
    if (std::find(variants.begin(), variants.end(), base) == variants.end())
        throw Error(fmt::format("baseline '{}' is not among the compared variants", variant_flag(base)));
    const Cycles lb = lower_bound_makespan(in.network, in.config);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    std::vector<fs::path> dirs;
    for (Variant v : variants)
        dirs.push_back(dir / variant_flag(v));

    std::vector<RunReport> reports = execute_all(variants, in, lb, dirs, a.jobs);
    normalize_reports(reports, variant_label(base));
    for (std::size_t i = 0; i < reports.size(); ++i)
        write_file(dirs[i] / "report.txt", format_report(reports[i]));
    const std::string table = format_comparison_table(reports);
    write_file(dir / "compare.txt", table);
    write_file(dir / "metrics.csv", format_csv(reports));
    out << table;
    return 0;
}

std::uint64_t schedule_pulses(const Schedule& s)
{
    std::uint64_t p = 0;
    for (const Instruction& in : s.instrs)
        if (in.kind == InstrKind::WriteCrossbar)
            p += in.delta.pulses;
    return p;
}

int cmd_analyze_reuse(const CommonArgs& a, std::ostream& out)
{
    const Inputs in = load_inputs(a);
    const NetworkModel& net = in.network;
    const ValidatedConfig& cfg = in.config;
    fmt::memory_buffer buf;
    auto it = std::back_inserter(buf);
    fmt::format_to(it, "# reuse analysis {}\nlayers = {}\n", net.name, net.layers.size());

    ArasOptions without = ArasOptions::br();
    without.clip_threshold = in.run.clip_threshold;
    Schedule s_without = aras_schedule(net, cfg, without);
    annotate_deltas(s_without, net, cfg);
    const std::uint64_t pulses_without = schedule_pulses(s_without);

    if (net.layers.size() < 2)
    {
        fmt::format_to(it, "note = no overwrite pairs\n");
        fmt::format_to(it, "\n[pulses]\nwithout_shift = {}\nwith_shift = {}\nreduction = 0\n", pulses_without,
                       pulses_without);
    }
    else
    {
        const ShiftPlan plan = select_center(net, cfg, in.run.clip_threshold, in.run.centers);
        fmt::format_to(it, "pairs = {}\nunshifted_score = {}\n", net.layers.size() - 1, unshifted_score(net, cfg));
        fmt::format_to(it, "chosen_center = {}\nfallback = {}\n", plan.center, plan.fallback ? 1 : 0);
        if (plan.fallback)
            fmt::format_to(it, "warning = no candidate center satisfies the clip threshold; weights left unshifted\n");

        fmt::format_to(it, "\n[candidates]\n# center score worst_clip total_clip survived\n");
        for (const CenterEvaluation& e : plan.evaluations)
            fmt::format_to(it, "{} {} {} {} {}\n", e.center, e.score, e.worst_clip_fraction, e.total_clip_fraction,
                           e.survived ? 1 : 0);

        fmt::format_to(it, "\n[layers]\n# layer offset clip_fraction mean_abs_clip_error adjusted_zero_point\n");
        for (std::size_t l = 0; l < plan.layers.size(); ++l)
        {
            const LayerShift& s = plan.layers[l];
            fmt::format_to(it, "{} {} {} {} {}\n", l, s.offset, s.clip_fraction, s.mean_abs_clip_error,
                           s.adjusted_zero_point);
        }

        std::vector<CellDistribution> before, after;
        for (std::size_t l = 0; l < net.layers.size(); ++l)
        {
            const QuantizedWeights& w = net.layers[l].weights;
            before.push_back(cell_distribution(w, cfg));
            after.push_back(before.back());
            if (plan.offset(static_cast<int>(l)) != 0)
            {
                QuantizedWeights shifted = w;
                const int max_w = (1 << net.weight_bits) - 1;
                for (std::uint8_t& v : shifted.values)
                    v = static_cast<std::uint8_t>(std::clamp(v + plan.offset(static_cast<int>(l)), 0, max_w));
                after.back() = cell_distribution(shifted, cfg);
            }
        }
        fmt::format_to(it, "\n[skipping]\n# pair position unshifted shifted\n");
        for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
            for (int pos = 1; pos <= cfg.cells_per_weight(); ++pos)
                fmt::format_to(it, "{}-{} {} {} {}\n", l, l + 1, pos, skipping_ratio(before[l], before[l + 1], pos),
                               skipping_ratio(after[l], after[l + 1], pos));

        ArasOptions with = ArasOptions::brw();
        with.clip_threshold = in.run.clip_threshold;
        with.centers = in.run.centers;
        Schedule s_with = aras_schedule(net, cfg, with);
        annotate_deltas(s_with, net, cfg);
        const std::uint64_t pulses_with = schedule_pulses(s_with);
        const double reduction =
            pulses_without == 0 ? 0.0
                                : 1.0 - static_cast<double>(pulses_with) / static_cast<double>(pulses_without);
        fmt::format_to(it, "\n[pulses]\nwithout_shift = {}\nwith_shift = {}\nreduction = {}\nshift_applied = {}\n",
                       pulses_without, pulses_with, reduction, s_with.shift && s_with.shift->applied() ? 1 : 0);
    }

    const std::string text = fmt::to_string(buf);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    write_file(dir / "reuse.txt", text);
    out << text;
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Event-driven simulator and scheduler for ReRAM crossbar DNN accelerators", "aras"};
    app.require_subcommand(1);

    CommonArgs sim_args, cmp_args, reuse_args;
    std::string variant = "brw";
    std::string sim_baseline = "naive";
    std::vector<std::string> variants = {"naive", "base", "b", "br", "brw"};
    std::string cmp_baseline;

    CLI::App* sim = app.add_subcommand("simulate", "Schedule and simulate one variant");
    add_common(sim, sim_args);
    sim->add_option("--variant", variant, "naive, base, b, br or brw")->capture_default_str();
    sim->add_option("--baseline", sim_baseline, "Variant used for the normalized ratios")->capture_default_str();

    CLI::App* cmp = app.add_subcommand("compare", "Simulate several variants and tabulate them");
    add_common(cmp, cmp_args);
    cmp->add_option("--variants", variants, "Variants to compare, comma separated")->delimiter(',')->capture_default_str();
    cmp->add_option("--baseline", cmp_baseline, "Normalization baseline (default: first variant)");

    CLI::App* reuse = app.add_subcommand("analyze-reuse", "Report center selection and cell reuse statistics");
    add_common(reuse, reuse_args);

    std::vector<std::string> argv_store = {"aras"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const std::string& s : argv_store)
        argv.push_back(s.c_str());

    try
    {
        app.parse(static_cast<int>(argv.size()), argv.data());
    }
    catch (const CLI::ParseError& e)
    {
        return app.exit(e, out, err);
    }

    try
    {
        if (sim->parsed())
            return cmd_simulate(sim_args, variant, sim_baseline, out);
        if (cmp->parsed())
            return cmd_compare(cmp_args, variants, cmp_baseline, out);
        if (reuse->parsed())
            return cmd_analyze_reuse(reuse_args, out);
    }
    catch (const std::exception& e)
    {
        fmt::print(err, "error: {}\n", e.what());
        return 1;
    }
    return 1;
}

}  // namespace aras
