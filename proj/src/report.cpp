#include "aras/report.hpp"

#include "aras/scheduler.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <iterator>
#include <limits>
#include <sstream>

namespace aras
{

Variant parse_variant(const std::string& name)
{
    if (name == "naive")
        return Variant::Naive;
    if (name == "base" || name == "baseline")
        return Variant::Base;
    if (name == "b")
        return Variant::B;
    if (name == "br")
        return Variant::BR;
    if (name == "brw")
        return Variant::BRW;
    throw Error(fmt::format("unknown variant '{}' (expected naive, base, b, br or brw)", name));
}

const char* variant_flag(Variant v)
{
    switch (v)
    {
        case Variant::Naive:
            return "naive";
        case Variant::Base:
            return "base";
        case Variant::B:
            return "b";
        case Variant::BR:
            return "br";
        case Variant::BRW:
            return "brw";
    }
    return "?";
}

const char* variant_label(Variant v)
{
    switch (v)
    {
        case Variant::Naive:
            return "naive";
        case Variant::Base:
            return "ARAS";
        case Variant::B:
            return "ARAS_B";
        case Variant::BR:
            return "ARAS_BR";
        case Variant::BRW:
            return "ARAS_BRW";
    }
    return "?";
}

RunOutput run_variant(Variant v, const NetworkModel& network, const ValidatedConfig& config, const RunOptions& options,
                      bool record_events)
{
    RunOutput out;
    if (v == Variant::Naive)
    {
        out.schedule = naive_schedule(network, config);
    }
    else
    {
        ArasOptions o = v == Variant::Base ? ArasOptions::base()
                        : v == Variant::B  ? ArasOptions::b()
                        : v == Variant::BR ? ArasOptions::br()
                                           : ArasOptions::brw();
        o.clip_threshold = options.clip_threshold;
        o.centers = options.centers;
        out.schedule = aras_schedule(network, config, o);
    }
    if (!out.schedule.annotated)
        annotate_deltas(out.schedule, network, config);
    SimOptions so;
    so.record_events = record_events;
    out.result = simulate_detailed(out.schedule, network, config, so);
    return out;
}

RunReport make_report(const std::string& network_name, const Schedule& schedule, const Metrics& metrics,
                      Cycles lower_bound)
{
    RunReport r;
    r.label = schedule.label;
    r.network = network_name;
    r.baseline = schedule.label;
    r.lower_bound = lower_bound;
    r.metrics = metrics;
    r.shift = schedule.shift;
    r.guard_rejections = schedule.guard_rejections;
    return r;
}

namespace
{

double ratio(double value, double base)
{
    if (base == 0.0)
        return value == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return value / base;
}

}  // namespace

void normalize_reports(std::vector<RunReport>& reports, const std::string& baseline)
{
    const RunReport* base = nullptr;
    for (const RunReport& r : reports)
        if (r.label == baseline)
            base = &r;
    if (!base)
        throw Error(fmt::format("baseline run '{}' not among the reports", baseline));
    const Metrics b = base->metrics;
    for (RunReport& r : reports)
    {
        const Metrics& m = r.metrics;
        r.baseline = baseline;
        r.normalized.clear();
        r.normalized["makespan"] = ratio(static_cast<double>(m.makespan), static_cast<double>(b.makespan));
        r.normalized["speedup"] = ratio(static_cast<double>(b.makespan), static_cast<double>(m.makespan));
        r.normalized["energy_total"] = ratio(m.energy_total(), b.energy_total());
        r.normalized["energy_write"] = ratio(m.energy_write, b.energy_write);
        r.normalized["energy_compute"] = ratio(m.energy_compute, b.energy_compute);
        r.normalized["energy_static"] = ratio(m.energy_static, b.energy_static);
        r.normalized["total_pulses"] = ratio(static_cast<double>(m.total_pulses), static_cast<double>(b.total_pulses));
    }
}

std::string format_report(const RunReport& r)
{
    const Metrics& m = r.metrics;
    fmt::memory_buffer out;
    auto it = std::back_inserter(out);
    fmt::format_to(it, "[run]\nlabel = {}\nnetwork = {}\nbaseline = {}\nwrite_latency_mode = {}\nguard_rejections = {}\n",
                   r.label, r.network, r.baseline, r.write_latency_mode, r.guard_rejections);
    fmt::format_to(it, "\n[metrics]\n");
    fmt::format_to(it, "makespan = {}\nlower_bound = {}\nupper_bound_ratio = {}\n", m.makespan, r.lower_bound,
                   r.upper_bound_ratio());
    fmt::format_to(it, "energy_write = {}\nenergy_compute = {}\nenergy_static = {}\nenergy_total = {}\n", m.energy_write,
                   m.energy_compute, m.energy_static, m.energy_total());
    fmt::format_to(it, "total_pulses = {}\noverlap_cycles = {}\ncrossbar_writes = {}\nfetch_bytes = {}\n",
                   m.total_pulses, m.overlap_cycles, m.crossbar_writes, m.fetch_bytes);
    fmt::format_to(it, "max_writes_per_cell = {}\n", m.max_writes_per_cell);
    if (!r.normalized.empty())
    {
        fmt::format_to(it, "\n[normalized]\n");
        for (const auto& [k, v] : r.normalized)
            fmt::format_to(it, "{} = {}\n", k, v);
    }
    for (const LayerMetrics& l : m.layers)
    {
        fmt::format_to(it, "\n[layer {}]\n", l.layer);
        fmt::format_to(it, "replication = {}\nsegments = {}\n", l.replication, l.segments);
        fmt::format_to(it, "write_start = {}\nwrite_end = {}\ncompute_start = {}\ncompute_end = {}\n", l.write_start,
                       l.write_end, l.compute_start, l.compute_end);
        fmt::format_to(it, "compute_cycles = {}\ncrossbar_writes = {}\npulses = {}\n", l.compute_cycles,
                       l.crossbar_writes, l.pulses);
        fmt::format_to(it, "energy_write = {}\nenergy_compute = {}\n", l.energy_write, l.energy_compute);
    }
    if (!m.writes_per_cell_histogram.empty())
    {
        fmt::format_to(it, "\n[histogram]\n");
        for (std::size_t k = 0; k < m.writes_per_cell_histogram.size(); ++k)
            fmt::format_to(it, "{} = {}\n", k, m.writes_per_cell_histogram[k]);
    }
    if (r.shift)
    {
        const ShiftPlan& s = *r.shift;
        fmt::format_to(it, "\n[shift]\ncenter = {}\nfallback = {}\nrejected = {}\n", s.center, s.fallback ? 1 : 0,
                       s.rejected ? 1 : 0);
        for (std::size_t i = 0; i < s.evaluations.size(); ++i)
        {
            const CenterEvaluation& e = s.evaluations[i];
            fmt::format_to(it, "candidate.{} = {} {} {} {} {}\n", i, e.center, e.score, e.worst_clip_fraction,
                           e.total_clip_fraction, e.survived ? 1 : 0);
        }
        for (std::size_t l = 0; l < s.layers.size(); ++l)
        {
            const LayerShift& ls = s.layers[l];
            fmt::format_to(it, "layer.{} = {} {} {} {}\n", l, ls.offset, ls.clip_fraction, ls.mean_abs_clip_error,
                           ls.adjusted_zero_point);
        }
    }
    return fmt::to_string(out);
}

namespace
{

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& v)
{
    return std::strtoull(v.c_str(), nullptr, 10);
}

double to_double(const std::string& v)
{
    return std::strtod(v.c_str(), nullptr);
}

}  // namespace

RunReport parse_report(const std::string& text)
{
    RunReport r;
    Metrics& m = r.metrics;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    LayerMetrics* layer = nullptr;
    while (std::getline(in, line))
    {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        if (line.front() == '[')
        {
            if (line.back() != ']')
                throw Error(fmt::format("report line {}: malformed section header", lineno));
            section = line.substr(1, line.size() - 2);
            layer = nullptr;
            if (section.rfind("layer ", 0) == 0)
            {
                m.layers.emplace_back();
                layer = &m.layers.back();
                layer->layer = std::atoi(section.c_str() + 6);
                section = "layer";
            }
            else if (section == "shift")
            {
                r.shift.emplace();
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(fmt::format("report line {}: expected 'key = value'", lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (section == "run")
        {
            if (key == "label")
                r.label = val;
            else if (key == "network")
                r.network = val;
            else if (key == "baseline")
                r.baseline = val;
            else if (key == "write_latency_mode")
                r.write_latency_mode = val;
            else if (key == "guard_rejections")
                r.guard_rejections = std::atoi(val.c_str());
        }
        else if (section == "metrics")
        {
            if (key == "makespan")
                m.makespan = to_u64(val);
            else if (key == "lower_bound")
                r.lower_bound = to_u64(val);
            else if (key == "energy_write")
                m.energy_write = to_double(val);
            else if (key == "energy_compute")
                m.energy_compute = to_double(val);
            else if (key == "energy_static")
                m.energy_static = to_double(val);
            else if (key == "total_pulses")
                m.total_pulses = to_u64(val);
            else if (key == "overlap_cycles")
                m.overlap_cycles = to_u64(val);
            else if (key == "crossbar_writes")
                m.crossbar_writes = to_u64(val);
            else if (key == "fetch_bytes")
                m.fetch_bytes = to_u64(val);
            else if (key == "max_writes_per_cell")
                m.max_writes_per_cell = to_u64(val);
        }
        else if (section == "normalized")
        {
            r.normalized[key] = to_double(val);
        }
        else if (section == "layer" && layer)
        {
            if (key == "replication")
                layer->replication = std::atoi(val.c_str());
            else if (key == "segments")
                layer->segments = std::atoi(val.c_str());
            else if (key == "write_start")
                layer->write_start = to_u64(val);
            else if (key == "write_end")
                layer->write_end = to_u64(val);
            else if (key == "compute_start")
                layer->compute_start = to_u64(val);
            else if (key == "compute_end")
                layer->compute_end = to_u64(val);
            else if (key == "compute_cycles")
                layer->compute_cycles = to_u64(val);
            else if (key == "crossbar_writes")
                layer->crossbar_writes = to_u64(val);
            else if (key == "pulses")
                layer->pulses = to_u64(val);
            else if (key == "energy_write")
                layer->energy_write = to_double(val);
            else if (key == "energy_compute")
                layer->energy_compute = to_double(val);
        }
        else if (section == "histogram")
        {
            const std::size_t k = to_u64(key);
            if (k >= m.writes_per_cell_histogram.size())
                m.writes_per_cell_histogram.resize(k + 1, 0);
            m.writes_per_cell_histogram[k] = to_u64(val);
        }
        else if (section == "shift" && r.shift)
        {
            std::istringstream vs(val);
            if (key == "center")
                r.shift->center = std::atoi(val.c_str());
            else if (key == "fallback")
                r.shift->fallback = val == "1";
            else if (key == "rejected")
                r.shift->rejected = val == "1";
            else if (key.rfind("candidate.", 0) == 0)
            {
                CenterEvaluation e;
                std::string score, worst, total;
                int survived = 0;
                vs >> e.center >> score >> worst >> total >> survived;
                e.score = to_double(score);
                e.worst_clip_fraction = to_double(worst);
                e.total_clip_fraction = to_double(total);
                e.survived = survived != 0;
                r.shift->evaluations.push_back(e);
            }
            else if (key.rfind("layer.", 0) == 0)
            {
                LayerShift ls;
                std::string clip, err;
                vs >> ls.offset >> clip >> err >> ls.adjusted_zero_point;
                ls.clip_fraction = to_double(clip);
                ls.mean_abs_clip_error = to_double(err);
                r.shift->layers.push_back(ls);
            }
        }
    }
    return r;
}

std::string format_csv(const std::vector<RunReport>& reports)
{
    std::string s = "label,makespan,lower_bound,upper_bound_ratio,energy_write,energy_compute,energy_static,"
                    "energy_total,total_pulses,overlap_cycles,crossbar_writes,fetch_bytes,speedup,energy_ratio,"
                    "pulse_ratio\n";
    for (const RunReport& r : reports)
    {
        const Metrics& m = r.metrics;
        auto norm = [&](const char* k) {
            const auto it = r.normalized.find(k);
            return it == r.normalized.end() ? 1.0 : it->second;
        };
        s += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.label, m.makespan, r.lower_bound,
                         r.upper_bound_ratio(), m.energy_write, m.energy_compute, m.energy_static, m.energy_total(),
                         m.total_pulses, m.overlap_cycles, m.crossbar_writes, m.fetch_bytes, norm("speedup"),
                         norm("energy_total"), norm("total_pulses"));
    }
    return s;
}

std::string format_comparison_table(const std::vector<RunReport>& reports)
{
    std::string s = fmt::format("{:<10} {:>14} {:>8} {:>12} {:>12} {:>12} {:>14} {:>8} {:>8} {:>8}\n", "variant",
                                "makespan", "ub%", "E_write", "E_compute", "E_static", "pulses", "speedup", "energy",
                                "pulses");
    for (const RunReport& r : reports)
    {
        const Metrics& m = r.metrics;
        auto norm = [&](const char* k) {
            const auto it = r.normalized.find(k);
            return it == r.normalized.end() ? 1.0 : it->second;
        };
        s += fmt::format("{:<10} {:>14} {:>8.2f} {:>12.4e} {:>12.4e} {:>12.4e} {:>14} {:>8.3f} {:>8.3f} {:>8.3f}\n",
                         r.label, m.makespan, 100.0 * r.upper_bound_ratio(), m.energy_write, m.energy_compute,
                         m.energy_static, m.total_pulses, norm("speedup"), norm("energy_total"), norm("total_pulses"));
    }
    return s;
}

}  // namespace aras
