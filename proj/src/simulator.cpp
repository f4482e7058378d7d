#include "aras/simulator.hpp"

#include "aras/scheduler.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <tuple>

namespace aras
{

Cycles row_write_latency(const CellDeltaMatrix& deltas, int row, const ValidatedConfig& config)
{
    if (row < 0 || row >= deltas.rows || row >= static_cast<int>(deltas.max_increase.size()))
        throw Error(fmt::format("row {} out of range", row));
    return static_cast<Cycles>(deltas.max_decrease[row] + deltas.max_increase[row]) * config->pulse_latency;
}

Cycles crossbar_write_latency(const CellDeltaMatrix& deltas, const ValidatedConfig& config)
{
    Cycles sum = 0;
    for (int r = 0; r < deltas.rows; ++r)
        sum += row_write_latency(deltas, r, config);
    return sum;
}

Cycles instruction_duration(const Instruction& in, const ValidatedConfig& config, const SimOptions& options)
{
    switch (in.kind)
    {
        case InstrKind::FetchDeltas:
            return config.fetch_cycles(in.bytes);
        case InstrKind::WriteCrossbar:
            if (options.write_latency_override)
                return *options.write_latency_override;
            return config->write_latency_mode == WriteLatencyMode::WorstCase ? config.crossbar_write_latency()
                                                                             : in.delta.row_latency_sum;
        case InstrKind::ComputeLayerSegment:
        {
            if (options.zero_compute)
                return 0;
            if (in.replication < 1)
                throw SimulationError(fmt::format("instruction {}: replication factor below 1", in.id));
            const std::uint64_t r = static_cast<std::uint64_t>(in.replication);
            return (in.windows + r - 1) / r * static_cast<Cycles>(config->activation_bits) *
                   config->crossbar_compute_latency;
        }
        default:
            return 0;
    }
}

namespace
{

enum class RowState
{
    Free,
    Writing,
    Holds,
    Computing,
};

struct RowLedger
{
    RowState state = RowState::Free;
    int layer = -1;
    int segment = -1;
    int active_writes = 0;
};

class Ledger
{
public:
    explicit Ledger(int rows) : rows_(rows) {}

    void check_rows(const Instruction& in) const
    {
        for (int r : in.pe_rows)
            if (r < 0 || r >= static_cast<int>(rows_.size()))
                throw SimulationError(fmt::format("instruction {} references PE row {} outside the accelerator", in.id, r));
    }

    void start(const Instruction& in)
    {
        switch (in.kind)
        {
            case InstrKind::WriteCrossbar:
                for (int r : in.pe_rows)
                {
                    RowLedger& s = rows_[r];
                    const bool same = s.layer == in.layer && s.segment == in.segment;
                    if (s.state == RowState::Free || ((s.state == RowState::Writing || s.state == RowState::Holds) && same))
                    {
                        s.state = RowState::Writing;
                        s.layer = in.layer;
                        s.segment = in.segment;
                        ++s.active_writes;
                    }
                    else
                    {
                        fail(in, r, "written while owned by another layer");
                    }
                }
                break;
            case InstrKind::ComputeLayerSegment:
                for (int r : in.pe_rows)
                {
                    RowLedger& s = rows_[r];
                    if (s.state != RowState::Holds || s.layer != in.layer || s.segment != in.segment)
                        fail(in, r, "computed before its weights were written");
                    s.state = RowState::Computing;
                }
                break;
            case InstrKind::Release:
                for (int r : in.pe_rows)
                {
                    RowLedger& s = rows_[r];
                    if (s.state != RowState::Holds || s.layer != in.layer || s.segment != in.segment)
                        fail(in, r, "released while not holding the layer");
                    s = RowLedger{};
                }
                break;
            default:
                break;
        }
    }

    void end(const Instruction& in)
    {
        if (in.kind == InstrKind::WriteCrossbar)
        {
            for (int r : in.pe_rows)
                if (--rows_[r].active_writes == 0)
                    rows_[r].state = RowState::Holds;
        }
        else if (in.kind == InstrKind::ComputeLayerSegment)
        {
            for (int r : in.pe_rows)
                rows_[r].state = RowState::Holds;
        }
    }

private:
    std::vector<RowLedger> rows_;

    [[noreturn]] static void fail(const Instruction& in, int row, const char* what)
    {
        throw SimulationError(fmt::format("instruction {} ({} layer {}): PE row {} {}", in.id, to_string(in.kind),
                                          in.layer, row, what));
    }
};

bool needs_annotation(const Schedule& s, const ValidatedConfig& config, const SimOptions& options)
{
    if (s.annotated)
        return false;
    if (!options.timing_only)
        return true;
    return config->write_latency_mode == WriteLatencyMode::Delta && !options.write_latency_override;
}

SimResult run(const Schedule& s, const NetworkModel& network, const ValidatedConfig& config, const SimOptions& options)
{
    const std::size_t n = s.instrs.size();
    const EnergyParams& energy = config->energy;
    Ledger ledger(config.total_pe_rows());

    std::vector<Cycles> dur(n);
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> children(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const Instruction& in = s.instrs[i];
        if (in.id != static_cast<int>(i))
            throw SimulationError(fmt::format("instruction at position {} carries id {}", i, in.id));
        ledger.check_rows(in);
        if ((in.kind == InstrKind::WriteCrossbar || in.kind == InstrKind::FetchDeltas) &&
            (!in.crossbar || in.pe_rows.empty()))
            throw SimulationError(fmt::format("instruction {} is not bound to a crossbar", in.id));
        if (in.kind == InstrKind::ComputeLayerSegment && in.pe_rows.empty())
            throw SimulationError(fmt::format("instruction {} computes on no PE rows", in.id));
        for (int d : in.deps)
        {
            if (d < 0 || d >= static_cast<int>(n) || d == in.id)
                throw SimulationError(fmt::format("instruction {} depends on invalid id {}", in.id, d));
            children[d].push_back(static_cast<int>(i));
            ++indeg[i];
        }
        dur[i] = instruction_duration(in, config, options);
    }

    SimResult res;
    res.start.assign(n, 0);
    res.end.assign(n, 0);
    std::vector<Cycles> ready_at(n, 0);

    using Event = std::tuple<Cycles, int, int>;  // time, id, phase (0 start, 1 end)
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    using Pending = std::pair<Cycles, int>;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> fetch_queue;
    bool channel_busy = false;

    auto make_ready = [&](int id, Cycles t) {
        if (s.instrs[id].kind == InstrKind::FetchDeltas)
            fetch_queue.emplace(t, id);
        else
            events.emplace(t, id, 0);
    };
    auto dispatch_fetch = [&](Cycles now) {
        if (channel_busy || fetch_queue.empty())
            return;
        const int id = fetch_queue.top().second;
        fetch_queue.pop();
        channel_busy = true;
        events.emplace(now, id, 0);
    };

    for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] == 0)
            make_ready(static_cast<int>(i), 0);
    dispatch_fetch(0);

    Cycles last_t = 0;
    double leakage = energy.base_leakage;
    int active_writes = 0;
    int active_computes = 0;
    std::size_t finished = 0;
    Metrics& m = res.metrics;

    while (!events.empty())
    {
        const auto [t, id, phase] = events.top();
        events.pop();
        if (t > last_t)
        {
            const Cycles dt = t - last_t;
            m.energy_static += leakage * static_cast<double>(dt);
            if (active_writes > 0 && active_computes > 0)
                m.overlap_cycles += dt;
            last_t = t;
        }
        const Instruction& in = s.instrs[id];
        const bool is_write = in.kind == InstrKind::WriteCrossbar || in.kind == InstrKind::FetchDeltas;
        if (phase == 0)
        {
            res.start[id] = t;
            ledger.start(in);
            if (in.kind == InstrKind::BankEnable)
                leakage = energy.base_leakage + leakage_of(in.banks, s.inventory);
            if (is_write)
                ++active_writes;
            if (in.kind == InstrKind::ComputeLayerSegment)
                ++active_computes;
            events.emplace(t + dur[id], id, 1);
            if (options.record_events)
                res.events.push_back({t, id, EventPhase::Start, leakage});
        }
        else
        {
            res.end[id] = t;
            ledger.end(in);
            ++finished;
            if (is_write)
                --active_writes;
            if (in.kind == InstrKind::ComputeLayerSegment)
                --active_computes;
            if (in.kind == InstrKind::FetchDeltas)
                channel_busy = false;
            for (int c : children[id])
            {
                ready_at[c] = std::max(ready_at[c], t);
                if (--indeg[c] == 0)
                    make_ready(c, ready_at[c]);
            }
            if (options.record_events)
                res.events.push_back({t, id, EventPhase::End, leakage});
        }
        dispatch_fetch(t);
    }
    if (finished != n)
        throw SimulationError("schedule has cyclic dependencies");

    m.makespan = last_t;
    if (options.timing_only)
        return res;

    const int n_layers = static_cast<int>(network.layers.size());
    m.layers.resize(n_layers);
    for (int l = 0; l < n_layers; ++l)
    {
        m.layers[l].layer = l;
        m.layers[l].write_start = std::numeric_limits<Cycles>::max();
        m.layers[l].compute_start = std::numeric_limits<Cycles>::max();
        if (l < static_cast<int>(s.replication.size()))
            m.layers[l].replication = s.replication[l];
        if (l < static_cast<int>(s.segments.size()))
            m.layers[l].segments = s.segments[l];
    }
    for (std::size_t i = 0; i < n; ++i)
    {
        const Instruction& in = s.instrs[i];
        if (in.layer < 0 || in.layer >= n_layers)
            continue;
        LayerMetrics& lm = m.layers[in.layer];
        switch (in.kind)
        {
            case InstrKind::FetchDeltas:
                m.fetch_bytes += in.bytes;
                lm.write_start = std::min(lm.write_start, res.start[i]);
                break;
            case InstrKind::WriteCrossbar:
                ++m.crossbar_writes;
                ++lm.crossbar_writes;
                m.total_pulses += in.delta.pulses;
                lm.pulses += in.delta.pulses;
                lm.write_start = std::min(lm.write_start, res.start[i]);
                lm.write_end = std::max(lm.write_end, res.end[i]);
                break;
            case InstrKind::ComputeLayerSegment:
            {
                const double e = energy.energy_per_crossbar_read * static_cast<double>(in.crossbars) *
                                 static_cast<double>(config->activation_bits) * static_cast<double>(in.windows);
                m.energy_compute += e;
                lm.energy_compute += e;
                lm.compute_cycles += dur[i];
                lm.compute_start = std::min(lm.compute_start, res.start[i]);
                lm.compute_end = std::max(lm.compute_end, res.end[i]);
                break;
            }
            default:
                break;
        }
    }
    for (LayerMetrics& lm : m.layers)
    {
        if (lm.write_start == std::numeric_limits<Cycles>::max())
            lm.write_start = 0;
        if (lm.compute_start == std::numeric_limits<Cycles>::max())
            lm.compute_start = 0;
        lm.energy_write = static_cast<double>(lm.pulses) * energy.energy_per_pulse;
    }
    m.energy_write = static_cast<double>(m.total_pulses) * energy.energy_per_pulse;
    m.writes_per_cell_histogram = s.writes_per_cell_histogram;
    m.max_writes_per_cell = s.max_writes_per_cell;
    return res;
}

}  // namespace

SimResult simulate_detailed(const Schedule& schedule, const NetworkModel& network, const ValidatedConfig& config,
                            const SimOptions& options)
{
    if (needs_annotation(schedule, config, options))
    {
        Schedule copy = schedule;
        annotate_deltas(copy, network, config);
        return run(copy, network, config, options);
    }
    return run(schedule, network, config, options);
}

Metrics simulate(const Schedule& schedule, const NetworkModel& network, const ValidatedConfig& config,
                 const SimOptions& options)
{
    return simulate_detailed(schedule, network, config, options).metrics;
}

double lifespan_estimate(const Metrics& metrics, double inferences_per_second, double endurance_cycles)
{
    if (!(inferences_per_second > 0.0))
        throw Error("inferences per second must be positive");
    if (!(endurance_cycles > 0.0))
        throw Error("endurance must be positive");
    if (metrics.max_writes_per_cell == 0)
        return std::numeric_limits<double>::infinity();
    constexpr double seconds_per_year = 365.25 * 24 * 3600;
    return endurance_cycles /
           (static_cast<double>(metrics.max_writes_per_cell) * inferences_per_second * seconds_per_year);
}

void export_timed_trace(const Schedule& schedule, const SimResult& result, std::ostream& out)
{
    fmt::print(out, "# timeline {} makespan={}\n", schedule.label, result.metrics.makespan);
    for (const TimedEvent& e : result.events)
    {
        const Instruction& in = schedule.instrs.at(e.instr);
        fmt::print(out, "{} {} {} {} layer={} leakage={}\n", e.time, e.phase == EventPhase::Start ? "START" : "END",
                   e.instr, to_string(in.kind), in.layer, e.leakage);
    }
}

}  // namespace aras
