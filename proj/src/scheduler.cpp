#include "aras/scheduler.hpp"

#include "aras/simulator.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace aras
{

namespace
{

std::vector<LayerBanks> assign_banks(const NetworkModel& network, const std::vector<BankSpec>& inventory)
{
    std::vector<LayerBanks> out;
    std::optional<std::vector<int>> carried;
    for (const Layer& layer : network.layers)
    {
        const LayerDescriptor& d = layer.desc;
        LayerBanks lb;
        bool solved = false;
        if (carried)
        {
            try
            {
                lb.assignment = solve_bank_selection(d.input_bytes, d.output_bytes, inventory, carried);
                solved = true;
            }
            catch (const SegmentRequired&)
            {
            }
        }
        for (int k = 1; !solved; ++k)
        {
            const std::uint64_t in = (d.input_bytes + k - 1) / k;
            const std::uint64_t out_bytes = (d.output_bytes + k - 1) / k;
            try
            {
                lb.assignment = solve_bank_selection(in, out_bytes, inventory);
                lb.passes = k;
                solved = true;
            }
            catch (const SegmentRequired&)
            {
                if (in <= 1 && out_bytes <= 1)
                    throw Error(fmt::format("layer {}: bank inventory cannot hold even one activation byte", d.id));
            }
        }
        lb.assignment.layer_id = d.id;
        carried = lb.assignment.output_banks;
        out.push_back(std::move(lb));
    }
    return out;
}

void add_dep(std::vector<int>& deps, int id)
{
    if (id >= 0)
        deps.push_back(id);
}

void normalize(std::vector<int>& deps)
{
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
}

/// Incremental construction of one schedule. Layers are placed PE row by PE row
/// in network order into the lowest free rows; computing proceeds layer by
/// layer and every release lets the writing procedure continue.
class Builder
{
public:
    Builder(const NetworkModel& network, const ValidatedConfig& config, const std::vector<ResourceRequirement>& reqs)
        : net_(&network)
        , cfg_(&config)
        , reqs_(&reqs)
        , n_(static_cast<int>(network.layers.size()))
        , total_rows_(config.total_pe_rows())
        , row_release_(total_rows_, -1)
        , replication_(n_, 1)
        , segments_(n_, 1)
        , planned_(n_, 0)
        , seg_writes_(n_)
        , seg_rows_(n_)
        , seg_crossbars_(n_)
    {
        for (int r = 0; r < total_rows_; ++r)
            free_rows_.insert(r);
        for (int l = 0; l < n_; ++l)
        {
            const int p = reqs[l].pe_rows_needed;
            segments_[l] = (p + total_rows_ - 1) / total_rows_;
            seg_writes_[l].resize(segments_[l]);
            seg_rows_[l].resize(segments_[l]);
            seg_crossbars_[l].assign(segments_[l], 0);
        }
    }

    bool serial = false;
    bool replication_enabled = false;
    bool guard = true;
    std::optional<ReplicationPlan> first_plan;
    int invocations_left = -1;
    int refine_trials = 24;
    Schedule sched;

    void start()
    {
        Instruction t;
        t.kind = InstrKind::Transfer;
        t.layer = 0;
        t.bytes = net_->layers.front().desc.input_bytes;
        emit(std::move(t));
    }

    void run()
    {
        fill();
        while (comp_layer_ < n_)
        {
            step_compute();
            fill();
        }
        Instruction t;
        t.kind = InstrKind::Transfer;
        t.layer = n_ - 1;
        t.bytes = net_->layers.back().desc.output_bytes;
        add_dep(t.deps, last_compute_);
        emit(std::move(t));
        sched.replication = replication_;
        sched.segments = segments_;
    }

private:
    const NetworkModel* net_;
    const ValidatedConfig* cfg_;
    const std::vector<ResourceRequirement>* reqs_;
    int n_;
    int total_rows_;
    std::set<int> free_rows_;
    std::vector<int> row_release_;
    int last_fetch_ = -1;
    int last_release_ = -1;
    int last_compute_ = -1;
    bool paused_ = false;

    std::vector<int> replication_;
    std::vector<int> segments_;
    std::vector<char> planned_;
    std::vector<std::vector<std::vector<int>>> seg_writes_;
    std::vector<std::vector<std::vector<int>>> seg_rows_;
    std::vector<std::vector<int>> seg_crossbars_;

    int place_layer_ = 0;
    int place_seg_ = 0;
    int place_rep_ = 0;
    int place_row_ = 0;
    int comp_layer_ = 0;
    int comp_seg_ = 0;

    int emit(Instruction in)
    {
        in.id = static_cast<int>(sched.instrs.size());
        normalize(in.deps);
        sched.instrs.push_back(std::move(in));
        return sched.instrs.back().id;
    }

    int rows_in_segment(int l, int s) const
    {
        const int p = (*reqs_)[l].pe_rows_needed;
        return std::min(total_rows_, p - s * total_rows_);
    }

    bool segment_placed(int l, int s) const
    {
        return place_layer_ > l || (place_layer_ == l && place_seg_ > s);
    }

    void place_unit(int row)
    {
        const int l = place_layer_;
        const int s = place_seg_;
        const ResourceRequirement& req = (*reqs_)[l];
        const LayerDescriptor& desc = net_->layers[l].desc;
        const AcceleratorConfig& p = cfg_->params();
        const int layer_row = s * total_rows_ + place_row_;
        const int v = layer_row / req.column_groups;
        const int g = layer_row % req.column_groups;
        const int h_end = std::min(req.horizontal_slices, (g + 1) * p.apu_cols_per_pe);

        free_rows_.erase(row);
        for (int h = g * p.apu_cols_per_pe; h < h_end; ++h)
        {
            const CrossbarCoord coord{row / p.apu_rows_per_pe, row % p.apu_rows_per_pe, h - g * p.apu_cols_per_pe};
            Instruction f;
            f.kind = InstrKind::FetchDeltas;
            f.layer = l;
            f.segment = s;
            f.replica = place_rep_;
            f.pe_rows = {row};
            f.crossbar = coord;
            f.slice_v = v;
            f.slice_h = h;
            f.bytes = (slice_populated_cells(desc, req, v, h, *cfg_) + 1) / 2;
            add_dep(f.deps, last_fetch_);
            add_dep(f.deps, row_release_[row]);
            if (serial)
                add_dep(f.deps, last_release_);
            Instruction w = f;
            w.kind = InstrKind::WriteCrossbar;
            w.bytes = 0;
            last_fetch_ = emit(std::move(f));
            w.deps = {last_fetch_};
            seg_writes_[l][s].push_back(emit(std::move(w)));
            if (place_rep_ == 0)
                ++seg_crossbars_[l][s];
        }
        seg_rows_[l][s].push_back(row);

        if (++place_row_ == rows_in_segment(l, s))
        {
            place_row_ = 0;
            if (++place_rep_ == replication_[l])
            {
                place_rep_ = 0;
                if (++place_seg_ == segments_[l])
                {
                    place_seg_ = 0;
                    ++place_layer_;
                }
            }
        }
    }

    void set_unreplicated(int L)
    {
        replication_[L] = 1;
        planned_[L] = 1;
    }

    void apply(const ReplicationPlan& plan)
    {
        for (std::size_t i = 0; i < plan.replication.size(); ++i)
        {
            const int l = plan.first_layer + static_cast<int>(i);
            replication_[l] = plan.replication[i];
            planned_[l] = 1;
        }
        paused_ = plan.replicates() || plan.deferred_layer.has_value();
        sched.replication_plans.push_back(plan);
    }

    Cycles continuation_makespan(Builder copy, const std::function<void(Builder&)>& decide) const
    {
        copy.guard = false;
        copy.first_plan.reset();
        decide(copy);
        copy.run();
        SimOptions opts;
        opts.timing_only = true;
        return simulate(copy.sched, *net_, *cfg_, opts).makespan;
    }

    void check_plan(const ReplicationPlan& plan, int L) const
    {
        if (plan.first_layer != L)
            throw Error(fmt::format("replication plan starts at layer {}, expected {}", plan.first_layer, L));
        if (plan.replication.empty() || plan.last_layer() >= n_)
            throw Error("replication plan window outside the network");
        int rows = 0;
        for (std::size_t i = 0; i < plan.replication.size(); ++i)
        {
            const ResourceRequirement& r = (*reqs_)[plan.first_layer + i];
            if (plan.replication[i] < 1 || (!r.is_conv && plan.replication[i] > 1))
                throw Error("invalid replication factor in plan");
            rows += plan.replication[i] * r.pe_rows_needed;
        }
        if (plan.replicates() && rows > static_cast<int>(free_rows_.size()))
            throw Error("replication plan exceeds the free PE rows");
    }

    void plan_layer(int L)
    {
        if (!replication_enabled || segments_[L] > 1 || invocations_left == 0)
        {
            set_unreplicated(L);
            return;
        }
        if (first_plan)
        {
            ReplicationPlan plan = *first_plan;
            first_plan.reset();
            replication_enabled = false;
            check_plan(plan, L);
            plan.free_rows = static_cast<int>(free_rows_.size());
            apply(plan);
            return;
        }
        std::vector<ReplicationPlan> plans =
            replication_trajectory(static_cast<int>(free_rows_.size()), L, *net_, *reqs_, *cfg_);
        if (invocations_left > 0)
            --invocations_left;
        // The scheme's own answer comes first so that it wins ties.
        std::rotate(plans.rbegin(), plans.rbegin() + 1, plans.rend());
        std::erase_if(plans, [](const ReplicationPlan& p) { return !p.replicates(); });
        if (plans.empty())
        {
            set_unreplicated(L);
            return;
        }
        if (!guard)
        {
            apply(plans.front());
            return;
        }
        const Cycles without = std::min(continuation_makespan(*this, [&](Builder& b) { b.set_unreplicated(L); }),
                                        continuation_makespan(*this, [&](Builder& b) {
                                            b.set_unreplicated(L);
                                            b.replication_enabled = false;
                                        }));
        std::vector<Cycles> makespans;
        for (const ReplicationPlan& p : plans)
            makespans.push_back(continuation_makespan(*this, [&](Builder& b) { b.apply(p); }));
        // Best plan of each window shape, refined separately.
        std::map<std::pair<std::size_t, int>, std::size_t> shapes;
        for (std::size_t i = 0; i < plans.size(); ++i)
        {
            const auto key = std::pair{plans[i].replication.size(), plans[i].deferred_layer.value_or(-1)};
            const auto it = shapes.find(key);
            if (it == shapes.end() || makespans[i] < makespans[it->second])
                shapes[key] = i;
        }
        std::optional<ReplicationPlan> best;
        Cycles best_makespan = without;
        bool own = false;
        if (makespans.front() <= without)
        {
            best = plans.front();
            best_makespan = makespans.front();
            own = true;
        }
        for (const auto& [key, i] : shapes)
        {
            Cycles m = makespans[i];
            ReplicationPlan p = refine(plans[i], m);
            if (m < best_makespan)
            {
                best = std::move(p);
                best_makespan = m;
                own = false;
            }
        }
        if (!own)
            ++sched.guard_rejections;
        if (!best)
        {
            set_unreplicated(L);
            return;
        }
        apply(*best);
    }

    // Hill climb over single-replica moves, bounded by a fixed number of trials.
    ReplicationPlan refine(ReplicationPlan plan, Cycles& makespan) const
    {
        const int free = static_cast<int>(free_rows_.size());
        const auto windows = [&](int l) { return static_cast<int>((*reqs_)[l].num_windows); };
        int trials = refine_trials;
        bool improved = true;
        while (improved && trials > 0)
        {
            improved = false;
            const int k = static_cast<int>(plan.replication.size());
            for (int from = -1; from < k && !improved && trials > 0; ++from)
            {
                for (int to = -1; to < k && !improved && trials > 0; ++to)
                {
                    if (from == to)
                        continue;
                    ReplicationPlan cand = plan;
                    if (from >= 0)
                    {
                        if (cand.replication[from] <= 1)
                            continue;
                        --cand.replication[from];
                    }
                    if (to >= 0)
                    {
                        const int l = plan.first_layer + to;
                        if (!(*reqs_)[l].is_conv || cand.replication[to] >= windows(l))
                            continue;
                        ++cand.replication[to];
                    }
                    for (int i = 0; i < k; ++i)
                        cand.allocated_rows[i] = cand.replication[i] * (*reqs_)[plan.first_layer + i].pe_rows_needed;
                    if (cand.rows_used() > free || !cand.replicates())
                        continue;
                    --trials;
                    const Cycles m = continuation_makespan(*this, [&](Builder& b) { b.apply(cand); });
                    if (m < makespan)
                    {
                        plan = std::move(cand);
                        makespan = m;
                        improved = true;
                    }
                }
            }
        }
        return plan;
    }

    void fill()
    {
        while (place_layer_ < n_)
        {
            if (serial && (place_layer_ != comp_layer_ || place_seg_ != comp_seg_))
                return;
            if (free_rows_.empty())
                return;
            if (!planned_[place_layer_])
            {
                if (paused_)
                    return;
                plan_layer(place_layer_);
                continue;
            }
            place_unit(*free_rows_.begin());
        }
    }

    void step_compute()
    {
        const int l = comp_layer_;
        const int s = comp_seg_;
        if (!segment_placed(l, s))
            throw Error(fmt::format("internal: layer {} segment {} not fully placed before compute", l, s));
        const LayerBanks& lb = sched.banks[l];

        int gate = last_compute_;
        if (s == 0)
        {
            Instruction be;
            be.kind = InstrKind::BankEnable;
            be.layer = l;
            be.banks = lb.assignment.selected();
            add_dep(be.deps, last_compute_);
            gate = emit(std::move(be));
            if (lb.passes > 1)
            {
                Instruction t;
                t.kind = InstrKind::Transfer;
                t.layer = l;
                t.bytes = net_->layers[l].desc.input_bytes;
                t.deps = {gate};
                gate = emit(std::move(t));
            }
        }

        Instruction c;
        c.kind = InstrKind::ComputeLayerSegment;
        c.layer = l;
        c.segment = s;
        c.pe_rows = seg_rows_[l][s];
        std::sort(c.pe_rows.begin(), c.pe_rows.end());
        c.windows = (*reqs_)[l].num_windows;
        c.replication = replication_[l];
        c.crossbars = seg_crossbars_[l][s];
        c.deps = seg_writes_[l][s];
        add_dep(c.deps, last_compute_);
        add_dep(c.deps, gate);
        const int cid = emit(std::move(c));

        Instruction r;
        r.kind = InstrKind::Release;
        r.layer = l;
        r.segment = s;
        r.pe_rows = sched.instrs[cid].pe_rows;
        r.deps = {cid};
        const int rid = emit(std::move(r));
        for (int row : sched.instrs[rid].pe_rows)
        {
            row_release_[row] = rid;
            free_rows_.insert(row);
        }
        last_release_ = rid;
        last_compute_ = cid;
        paused_ = false;

        if (++comp_seg_ == segments_[l])
        {
            if (segments_[l] > 1)
            {
                Instruction a;
                a.kind = InstrKind::Accumulate;
                a.layer = l;
                a.deps = {cid};
                last_compute_ = emit(std::move(a));
            }
            comp_seg_ = 0;
            ++comp_layer_;
        }
    }
};

std::string label_for(const ArasOptions& o)
{
    if (!o.bank_selection && !o.replication && !o.weight_reuse)
        return "ARAS";
    std::string s = "ARAS_";
    if (o.bank_selection)
        s += 'B';
    if (o.replication)
        s += 'R';
    if (o.weight_reuse)
        s += 'W';
    return s;
}

}  // namespace

Schedule naive_schedule(const NetworkModel& network, const ValidatedConfig& config)
{
    validate_network(network);
    check_compatible(network, config);
    const std::vector<ResourceRequirement> reqs = map_network(network, config);
    Builder b(network, config, reqs);
    b.serial = true;
    b.sched.label = "naive";
    b.sched.inventory = config->baseline_bank_inventory;
    b.sched.banks = assign_banks(network, b.sched.inventory);
    b.start();
    b.run();
    return std::move(b.sched);
}

namespace
{

Schedule build_aras(const NetworkModel& network, const ValidatedConfig& config, const ArasOptions& options,
                    const std::vector<ResourceRequirement>& reqs, const std::optional<ShiftPlan>& shift)
{
    Builder b(network, config, reqs);
    b.replication_enabled = options.replication;
    b.guard = options.replication_guard;
    b.first_plan = options.first_plan;
    b.invocations_left = options.max_replication_invocations;
    b.sched.label = label_for(options);
    b.sched.inventory = options.bank_selection ? config->bank_inventory : config->baseline_bank_inventory;
    b.sched.banks = assign_banks(network, b.sched.inventory);
    b.sched.shift = shift;
    b.start();
    b.run();
    return std::move(b.sched);
}

std::uint64_t annotated_pulses(Schedule& s, const NetworkModel& network, const ValidatedConfig& config)
{
    annotate_deltas(s, network, config);
    std::uint64_t total = 0;
    for (const Instruction& in : s.instrs)
        total += in.delta.pulses;
    return total;
}

}  // namespace

Schedule aras_schedule(const NetworkModel& network, const ValidatedConfig& config, const ArasOptions& options)
{
    validate_network(network);
    check_compatible(network, config);
    const std::vector<ResourceRequirement> reqs = map_network(network, config);
    if (!options.weight_reuse || network.layers.size() < 2)
        return build_aras(network, config, options, reqs, std::nullopt);

    ShiftPlan plan = select_center(network, config, options.clip_threshold, options.centers);
    Schedule shifted = build_aras(network, config, options, reqs, plan);
    if (!options.reuse_guard || !plan.applied())
        return shifted;
    plan.rejected = true;
    // Without delta-driven timing the instruction stream does not depend on the weights.
    Schedule plain = config->write_latency_mode == WriteLatencyMode::WorstCase
                         ? shifted
                         : build_aras(network, config, options, reqs, plan);
    plain.shift = plan;
    if (annotated_pulses(shifted, network, config) < annotated_pulses(plain, network, config))
        return shifted;
    return plain;
}

Cycles lower_bound_makespan(const NetworkModel& network, const ValidatedConfig& config)
{
    Schedule s = aras_schedule(network, config, ArasOptions::base());
    SimOptions opts;
    opts.timing_only = true;
    opts.zero_compute = true;
    if (config->write_latency_mode == WriteLatencyMode::Delta)
        opts.write_latency_override = 0;
    return simulate(s, network, config, opts).makespan;
}

void annotate_deltas(Schedule& schedule, const NetworkModel& network, const ValidatedConfig& config)
{
    const AcceleratorConfig& p = config.params();
    const std::vector<ResourceRequirement> reqs = map_network(network, config);
    const std::size_t cells = static_cast<std::size_t>(p.crossbar_rows) * p.crossbar_cols;
    const std::size_t n_xbars = static_cast<std::size_t>(config.total_crossbars());
    std::vector<std::vector<std::uint8_t>> current(n_xbars);
    std::vector<std::vector<std::uint16_t>> counts(n_xbars);
    std::vector<std::uint8_t> next;

    for (Instruction& in : schedule.instrs)
    {
        if (in.kind != InstrKind::WriteCrossbar)
            continue;
        if (!in.crossbar || in.layer < 0 || in.layer >= static_cast<int>(network.layers.size()))
            throw Error(fmt::format("write instruction {} is not bound to a crossbar and layer", in.id));
        const CrossbarCoord& c = *in.crossbar;
        const std::size_t x =
            (static_cast<std::size_t>(c.pe) * p.apu_rows_per_pe + c.apu_row) * p.apu_cols_per_pe + c.apu_col;
        if (x >= n_xbars)
            throw Error(fmt::format("write instruction {} targets a crossbar outside the accelerator", in.id));
        if (current[x].empty())
        {
            current[x].assign(cells, 0);
            counts[x].assign(cells, 0);
        }
        const int offset = schedule.shift ? schedule.shift->offset(in.layer) : 0;
        fill_slice_cells(network.layers[in.layer], reqs[in.layer], in.slice_v, in.slice_h, config, next, offset);

        DeltaSummary d;
        std::uint8_t* cur = current[x].data();
        std::uint16_t* cnt = counts[x].data();
        for (int r = 0; r < p.crossbar_rows; ++r)
        {
            int inc = 0;
            int dec = 0;
            std::uint64_t pulses = 0;
            std::uint64_t changed = 0;
            const std::size_t base = static_cast<std::size_t>(r) * p.crossbar_cols;
            for (int k = 0; k < p.crossbar_cols; ++k)
            {
                const std::size_t i = base + k;
                const int delta = static_cast<int>(next[i]) - static_cast<int>(cur[i]);
                const int touched = delta != 0;
                inc = std::max(inc, delta);
                dec = std::max(dec, -delta);
                pulses += static_cast<std::uint64_t>(delta < 0 ? -delta : delta);
                changed += static_cast<std::uint64_t>(touched);
                cur[i] = next[i];
                cnt[i] = static_cast<std::uint16_t>(cnt[i] + (touched & (cnt[i] < UINT16_MAX)));
            }
            d.pulses += pulses;
            d.changed_cells += changed;
            d.row_latency_sum += static_cast<Cycles>(inc + dec) * p.pulse_latency;
        }
        in.delta = d;
    }

    std::vector<std::uint64_t> hist(1, 0);
    std::uint64_t max_w = 0;
    for (std::size_t x = 0; x < n_xbars; ++x)
    {
        if (counts[x].empty())
        {
            hist[0] += cells;
            continue;
        }
        for (std::uint16_t k : counts[x])
        {
            if (k >= hist.size())
                hist.resize(k + 1, 0);
            ++hist[k];
            max_w = std::max<std::uint64_t>(max_w, k);
        }
    }
    schedule.writes_per_cell_histogram = std::move(hist);
    schedule.max_writes_per_cell = max_w;
    schedule.annotated = true;
}

}  // namespace aras
