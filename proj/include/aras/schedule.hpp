#pragma once

#include "aras/bank_alloc.hpp"
#include "aras/mapping.hpp"
#include "aras/replication.hpp"
#include "aras/weight_reuse.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace aras
{

enum class InstrKind
{
    FetchDeltas,
    WriteCrossbar,
    ComputeLayerSegment,
    Release,
    BankEnable,
    Accumulate,
    Transfer,
};

const char* to_string(InstrKind kind);

/// Pulse statistics of one crossbar write, filled in by annotate_deltas.
struct DeltaSummary
{
    std::uint64_t pulses = 0;
    std::uint64_t changed_cells = 0;
    /// Sum over rows of (max decrease + max increase) * pulse_latency.
    Cycles row_latency_sum = 0;
};

struct Instruction
{
    int id = 0;
    InstrKind kind = InstrKind::Transfer;
    int layer = -1;
    int segment = 0;
    int replica = 0;
    /// Global PE row ids (pe * apu_rows_per_pe + apu_row).
    std::vector<int> pe_rows;
    std::vector<int> deps;

    // FetchDeltas / WriteCrossbar
    std::optional<CrossbarCoord> crossbar;
    int slice_v = 0;
    int slice_h = 0;
    std::uint64_t bytes = 0;  // FetchDeltas, Transfer
    DeltaSummary delta;       // WriteCrossbar

    // ComputeLayerSegment
    std::uint64_t windows = 0;
    int replication = 1;
    int crossbars = 0;  // crossbars of one replica of the segment

    // BankEnable
    std::vector<int> banks;
};

struct LayerBanks
{
    BankAssignment assignment;
    /// Activation passes; above 1 the layer spills through main memory.
    int passes = 1;
};

struct Schedule
{
    std::string label;
    std::vector<Instruction> instrs;
    std::vector<BankSpec> inventory;
    std::vector<LayerBanks> banks;
    std::optional<ShiftPlan> shift;
    std::vector<ReplicationPlan> replication_plans;
    std::vector<int> replication;  // final R per layer
    std::vector<int> segments;     // per layer
    /// Replication decisions where the guard overrode the scheme's final plan.
    int guard_rejections = 0;

    bool annotated = false;
    /// histogram[k] = number of cells programmed k times during the inference.
    std::vector<std::uint64_t> writes_per_cell_histogram;
    std::uint64_t max_writes_per_cell = 0;
};

/// Line-oriented dump: a header with bank assignments, shift and replication
/// plans, then one line per instruction.
void export_schedule_trace(const Schedule& schedule, std::ostream& out);

}  // namespace aras
