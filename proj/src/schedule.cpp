#include "aras/schedule.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

#include <ostream>

namespace aras
{

const char* to_string(InstrKind kind)
{
    switch (kind)
    {
        case InstrKind::FetchDeltas:
            return "FETCH_DELTAS";
        case InstrKind::WriteCrossbar:
            return "WRITE_CROSSBAR";
        case InstrKind::ComputeLayerSegment:
            return "COMPUTE_LAYER_SEGMENT";
        case InstrKind::Release:
            return "RELEASE";
        case InstrKind::BankEnable:
            return "BANK_ENABLE";
        case InstrKind::Accumulate:
            return "ACCUMULATE";
        case InstrKind::Transfer:
            return "TRANSFER";
    }
    return "?";
}

namespace
{

/// Compresses sorted ids into "a-b,c" runs.
std::string ranges(const std::vector<int>& ids)
{
    std::string s;
    for (std::size_t i = 0; i < ids.size();)
    {
        std::size_t j = i;
        while (j + 1 < ids.size() && ids[j + 1] == ids[j] + 1)
            ++j;
        if (!s.empty())
            s += ',';
        s += j == i ? fmt::format("{}", ids[i]) : fmt::format("{}-{}", ids[i], ids[j]);
        i = j + 1;
    }
    return s.empty() ? "-" : s;
}

}  // namespace

void export_schedule_trace(const Schedule& s, std::ostream& out)
{
    fmt::print(out, "# schedule {}\n", s.label);
    fmt::print(out, "# instructions {}\n", s.instrs.size());
    for (std::size_t l = 0; l < s.banks.size(); ++l)
    {
        const LayerBanks& b = s.banks[l];
        fmt::print(out, "# banks layer={} in={} out={} passes={} leakage={}\n", l, ranges(b.assignment.input_banks),
                   ranges(b.assignment.output_banks), b.passes, b.assignment.total_leakage);
    }
    if (s.shift)
    {
        fmt::print(out, "# shift center={} fallback={}\n", s.shift->center, s.shift->fallback ? 1 : 0);
        for (std::size_t l = 0; l < s.shift->layers.size(); ++l)
        {
            const LayerShift& ls = s.shift->layers[l];
            fmt::print(out, "# shift layer={} offset={} clip={} zp={}\n", l, ls.offset, ls.clip_fraction,
                       ls.adjusted_zero_point);
        }
    }
    for (const ReplicationPlan& p : s.replication_plans)
    {
        fmt::print(out, "# replication L={} branch={} free={} K={} iterations={} WL={} interior={} R=[{}] rows=[{}]",
                   p.first_layer, to_string(p.branch), p.free_rows, p.initial_window, p.iterations,
                   p.write_latency_threshold, p.interior_compute, fmt::join(p.replication, ","),
                   fmt::join(p.allocated_rows, ","));
        if (p.deferred_layer)
            fmt::print(out, " deferred={}", *p.deferred_layer);
        out << '\n';
    }
    if (!s.replication.empty())
        fmt::print(out, "# layer-replication [{}]\n", fmt::join(s.replication, ","));

    for (const Instruction& in : s.instrs)
    {
        fmt::print(out, "{} {} layer={}", in.id, to_string(in.kind), in.layer);
        switch (in.kind)
        {
            case InstrKind::FetchDeltas:
            case InstrKind::WriteCrossbar:
                fmt::print(out, " seg={} rep={} rows={} xbar=({},{},{}) slice=({},{})", in.segment, in.replica,
                           ranges(in.pe_rows), in.crossbar ? in.crossbar->pe : -1, in.crossbar ? in.crossbar->apu_row : -1,
                           in.crossbar ? in.crossbar->apu_col : -1, in.slice_v, in.slice_h);
                if (in.kind == InstrKind::FetchDeltas)
                    fmt::print(out, " bytes={}", in.bytes);
                else if (s.annotated)
                    fmt::print(out, " pulses={} changed={} rowlat={}", in.delta.pulses, in.delta.changed_cells,
                               in.delta.row_latency_sum);
                break;
            case InstrKind::ComputeLayerSegment:
                fmt::print(out, " seg={} rows={} windows={} R={} xbars={}", in.segment, ranges(in.pe_rows), in.windows,
                           in.replication, in.crossbars);
                break;
            case InstrKind::Release:
                fmt::print(out, " seg={} rows={}", in.segment, ranges(in.pe_rows));
                break;
            case InstrKind::BankEnable:
                fmt::print(out, " banks={}", ranges(in.banks));
                break;
            case InstrKind::Transfer:
                fmt::print(out, " bytes={}", in.bytes);
                break;
            case InstrKind::Accumulate:
                break;
        }
        fmt::print(out, " deps=[{}]\n", fmt::join(in.deps, ","));
    }
}

}  // namespace aras
