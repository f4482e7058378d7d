#pragma once

#include "aras/schedule.hpp"

#include <optional>
#include <vector>

namespace aras
{

struct ArasOptions
{
    bool bank_selection = true;
    bool replication = true;
    bool weight_reuse = true;
    /// Simulate the scheme's plan, the intermediate plans it passed through, small
    /// replica moves around them and no replication at all, and keep the fastest.
    bool replication_guard = true;
    /// Keep the shift plan only if the replayed writes need fewer pulses than without it.
    bool reuse_guard = true;
    double clip_threshold = 0.001;
    std::vector<int> centers = default_centers();
    /// Replaces the first replication decision; later decisions are skipped.
    std::optional<ReplicationPlan> first_plan;
    /// Stop replicating after this many planning decisions (negative: unlimited).
    int max_replication_invocations = -1;

    static ArasOptions with(bool banks, bool replicate, bool reuse)
    {
        ArasOptions o;
        o.bank_selection = banks;
        o.replication = replicate;
        o.weight_reuse = reuse;
        return o;
    }
    static ArasOptions base() { return with(false, false, false); }
    static ArasOptions b() { return with(true, false, false); }
    static ArasOptions br() { return with(true, true, false); }
    static ArasOptions brw() { return with(true, true, true); }
};

/// Strictly serial: write a layer segment, compute it, release it, repeat.
/// Uses the homogeneous baseline bank inventory.
Schedule naive_schedule(const NetworkModel& network, const ValidatedConfig& config);

/// Overlapped writing and computing with the optimizations selected in options.
/// When the reuse guard runs, the returned schedule comes back annotated.
Schedule aras_schedule(const NetworkModel& network, const ValidatedConfig& config, const ArasOptions& options = {});

/// Time to write every layer once under the resource and bandwidth limits,
/// with computation taking no time.
Cycles lower_bound_makespan(const NetworkModel& network, const ValidatedConfig& config);

/// Replays the writes in instruction order against the crossbar contents,
/// filling in per-write pulse statistics and per-cell write counts.
void annotate_deltas(Schedule& schedule, const NetworkModel& network, const ValidatedConfig& config);

}  // namespace aras
