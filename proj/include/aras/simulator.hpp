#pragma once

#include "aras/schedule.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace aras
{

class SimulationError : public Error
{
public:
    using Error::Error;
};

struct LayerMetrics
{
    int layer = 0;
    int replication = 1;
    int segments = 1;
    Cycles write_start = 0;
    Cycles write_end = 0;
    Cycles compute_start = 0;
    Cycles compute_end = 0;
    Cycles compute_cycles = 0;
    std::uint64_t crossbar_writes = 0;
    std::uint64_t pulses = 0;
    double energy_write = 0.0;
    double energy_compute = 0.0;
};

struct Metrics
{
    Cycles makespan = 0;
    double energy_write = 0.0;
    double energy_compute = 0.0;
    double energy_static = 0.0;
    std::uint64_t total_pulses = 0;
    /// Cycles during which weights are written while some layer computes.
    Cycles overlap_cycles = 0;
    std::uint64_t crossbar_writes = 0;
    std::uint64_t fetch_bytes = 0;
    std::vector<LayerMetrics> layers;
    std::vector<std::uint64_t> writes_per_cell_histogram;
    std::uint64_t max_writes_per_cell = 0;

    double energy_total() const { return energy_write + energy_compute + energy_static; }
};

enum class EventPhase
{
    Start,
    End,
};

struct TimedEvent
{
    Cycles time = 0;
    int instr = 0;
    EventPhase phase = EventPhase::Start;
    /// Leakage (joules per cycle) in force from this event on.
    double leakage = 0.0;
};

struct SimOptions
{
    /// Skip energy and pulse accounting; write latencies still need annotation in delta mode.
    bool timing_only = false;
    bool zero_compute = false;
    std::optional<Cycles> write_latency_override;
    bool record_events = false;
};

struct SimResult
{
    Metrics metrics;
    std::vector<Cycles> start;
    std::vector<Cycles> end;
    std::vector<TimedEvent> events;
};

/// (max decrease + max increase) * pulse_latency for one row.
Cycles row_write_latency(const CellDeltaMatrix& deltas, int row, const ValidatedConfig& config);

/// Rows are written one after another.
Cycles crossbar_write_latency(const CellDeltaMatrix& deltas, const ValidatedConfig& config);

/// Duration of one instruction under the configured timing model.
Cycles instruction_duration(const Instruction& instr, const ValidatedConfig& config, const SimOptions& options = {});

/// Discrete-event execution. Unannotated schedules are annotated on a copy
/// when pulse counts are needed.
SimResult simulate_detailed(const Schedule& schedule, const NetworkModel& network, const ValidatedConfig& config,
                            const SimOptions& options = {});

Metrics simulate(const Schedule& schedule, const NetworkModel& network, const ValidatedConfig& config,
                 const SimOptions& options = {});

/// Years until the most-written cell reaches its endurance.
double lifespan_estimate(const Metrics& metrics, double inferences_per_second, double endurance_cycles);

/// One line per event: time, phase, instruction id, kind, layer.
void export_timed_trace(const Schedule& schedule, const SimResult& result, std::ostream& out);

}  // namespace aras
