#include "aras/scheduler.hpp"
#include "aras/simulator.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace aras;

namespace
{

Cycles makespan(const Schedule& s, const NetworkModel& net, const ValidatedConfig& cfg)
{
    return simulate(s, net, cfg).makespan;
}

int count(const Schedule& s, InstrKind k)
{
    return static_cast<int>(std::count_if(s.instrs.begin(), s.instrs.end(), [&](auto& i) { return i.kind == k; }));
}

NetworkModel net_of(std::vector<Layer> layers)
{
    NetworkModel n;
    n.name = "t";
    n.layers = std::move(layers);
    validate_network(n);
    return n;
}

/// FC 128 -> 32: a single full-height crossbar, 8192 fetch bytes.
Layer one_crossbar_fc(int id, std::mt19937_64& rng)
{
    return test::make_layer(id, LayerKind::FC, 1, 128, 32, 1, rng);
}

bool depends_on(const Schedule& s, int from, int target)
{
    std::vector<int> stack = {from};
    std::set<int> seen;
    while (!stack.empty())
    {
        const int i = stack.back();
        stack.pop_back();
        for (int d : s.instrs[i].deps)
        {
            if (d == target)
                return true;
            if (seen.insert(d).second)
                stack.push_back(d);
        }
    }
    return false;
}

constexpr Cycles fc_fetch = 427;  // ceil(8192 / 19.2)

}  // namespace

TEST_CASE("naive: two equal layers run write, compute, write, compute")
{
    const ValidatedConfig cfg = default_config();
    std::mt19937_64 rng(1);
    const NetworkModel net = net_of({one_crossbar_fc(0, rng), one_crossbar_fc(1, rng)});
    const Schedule s = naive_schedule(net, cfg);
    CHECK(makespan(s, net, cfg) == 2 * (fc_fetch + 768000 + 768));
}

TEST_CASE("naive: single FC layer")
{
    const ValidatedConfig cfg = default_config();
    std::mt19937_64 rng(1);
    const NetworkModel net = net_of({one_crossbar_fc(0, rng)});
    const Schedule s = naive_schedule(net, cfg);
    CHECK(count(s, InstrKind::WriteCrossbar) == 1);
    CHECK(count(s, InstrKind::ComputeLayerSegment) == 1);
    CHECK(count(s, InstrKind::Transfer) >= 1);
    CHECK(makespan(s, net, cfg) == fc_fetch + 768000 + 768);
}

TEST_CASE("oversized layers are segmented")
{
    AcceleratorConfig p = test::small_params(2);
    const ValidatedConfig cfg = validate_config(p);
    std::mt19937_64 rng(2);
    const NetworkModel net = net_of({test::make_layer(0, LayerKind::FC, 1, 768, 8, 1, rng)});
    REQUIRE(map_layer(net.layers[0].desc, cfg).pe_rows_needed == 24);
    for (const Schedule& s : {naive_schedule(net, cfg), aras_schedule(net, cfg)})
    {
        CHECK(s.segments[0] == 2);
        CHECK(count(s, InstrKind::ComputeLayerSegment) == 2);
        CHECK(count(s, InstrKind::Accumulate) == 1);
        CHECK(count(s, InstrKind::WriteCrossbar) == 24);
    }
    // Each segment writes 12 crossbars (serial fetches of 512 bytes) then computes.
    const Cycles seg = 12 * cfg.fetch_cycles(512) + cfg.crossbar_write_latency() + 768;
    CHECK(makespan(naive_schedule(net, cfg), net, cfg) == 2 * seg);
}

TEST_CASE("the next layer's write hides behind the current compute")
{
    const ValidatedConfig cfg = default_config();
    std::mt19937_64 rng(3);
    const NetworkModel net = net_of({test::make_layer(0, LayerKind::Conv, 3, 3, 8, 32, rng), one_crossbar_fc(1, rng)});
    const Cycles write0 = cfg.fetch_cycles(3 * 9 * 8 * 4 / 2) + 768000;
    const Cycles compute0 = 1024 * 768;
    const Schedule s = aras_schedule(net, cfg, ArasOptions::base());
    CHECK(makespan(s, net, cfg) == write0 + compute0 + 768);

    AcceleratorConfig tight = default_accelerator_config();
    tight.num_pes = 1;
    tight.apu_rows_per_pe = 1;
    const ValidatedConfig one_row = validate_config(tight);
    CHECK(makespan(aras_schedule(net, one_row, ArasOptions::base()), net, one_row) ==
          makespan(naive_schedule(net, one_row), net, one_row));
}

TEST_CASE("lower bound examples")
{
    std::mt19937_64 rng(4);
    const ValidatedConfig cfg = default_config();
    const NetworkModel one = net_of({one_crossbar_fc(0, rng)});
    CHECK(lower_bound_makespan(one, cfg) == fc_fetch + 768000);

    AcceleratorConfig fast = default_accelerator_config();
    fast.mm_bandwidth = 1e12;
    const ValidatedConfig wide = validate_config(fast);
    std::vector<Layer> layers;
    for (int i = 0; i < 5; ++i)
        layers.push_back(one_crossbar_fc(i, rng));
    const NetworkModel five = net_of(layers);
    CHECK(lower_bound_makespan(five, wide) == 768000 + 5);

    fast.num_pes = 1;
    fast.apu_rows_per_pe = 1;
    const ValidatedConfig single = validate_config(fast);
    CHECK(lower_bound_makespan(five, single) == 5 * (768000 + 1));
}

TEST_CASE("structural invariants of generated schedules")
{
    const ValidatedConfig cfg = validate_config(test::small_params());
    for (std::uint64_t seed = 0; seed < 25; ++seed)
    {
        const NetworkModel net = test::random_network(seed, 1, 10);
        for (const Schedule& s : {naive_schedule(net, cfg), aras_schedule(net, cfg)})
        {
            std::set<int> writes_seen;
            int last_compute = -1;
            int last_layer = -1;
            std::map<std::pair<int, int>, std::set<int>> seg_writes;
            for (const Instruction& in : s.instrs)
            {
                for (int d : in.deps)
                    REQUIRE(d < in.id);
                if (in.kind == InstrKind::WriteCrossbar)
                    seg_writes[{in.layer, in.segment}].insert(in.id);
                if (in.kind == InstrKind::ComputeLayerSegment)
                {
                    CHECK(in.layer >= last_layer);
                    const std::set<int> deps(in.deps.begin(), in.deps.end());
                    for (int w : seg_writes[{in.layer, in.segment}])
                        CHECK(deps.count(w) == 1);
                    if (last_compute >= 0)
                        CHECK(depends_on(s, in.id, last_compute));
                    last_compute = in.id;
                    last_layer = in.layer;
                }
            }
        }
    }
}

TEST_CASE("dominance and bound on random networks")
{
    const ValidatedConfig cfg = validate_config(test::small_params());
    for (std::uint64_t seed = 100; seed < 130; ++seed)
    {
        const NetworkModel net = test::random_network(seed);
        const Cycles naive = makespan(naive_schedule(net, cfg), net, cfg);
        const Cycles lb = lower_bound_makespan(net, cfg);
        CHECK(naive >= lb);
        Cycles prev = naive;
        for (const ArasOptions& o : {ArasOptions::base(), ArasOptions::b(), ArasOptions::br(), ArasOptions::brw()})
        {
            const Cycles m = makespan(aras_schedule(net, cfg, o), net, cfg);
            CHECK(m <= naive);
            CHECK(m >= lb);
            if (o.replication)
                CHECK(m <= prev);
            else
                prev = m;
        }
    }
}

TEST_CASE("shifting never adds pulses on two Gaussian layers")
{
    const ValidatedConfig cfg = validate_config(test::small_params());
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> m(50.0, 205.0);
        std::uniform_real_distribution<double> sd(3.0, 16.0);
        const double m0 = m(rng);
        double m1 = m(rng);
        while (std::abs(m1 - m0) < 20.0)
            m1 = m(rng);
        const NetworkModel net = net_of({test::make_layer(0, LayerKind::Conv, 3, 16, 16, 8, rng, m0, sd(rng)),
                                         test::make_layer(1, LayerKind::Conv, 3, 16, 16, 8, rng, m1, sd(rng))});
        const Metrics br = simulate(aras_schedule(net, cfg, ArasOptions::br()), net, cfg);
        const Metrics brw = simulate(aras_schedule(net, cfg, ArasOptions::brw()), net, cfg);
        CHECK(brw.total_pulses <= br.total_pulses);
    }
}

TEST_CASE("identical consecutive layers gain nothing from shifting")
{
    AcceleratorConfig p = test::small_params(1);
    p.apu_rows_per_pe = 2;
    const ValidatedConfig cfg = validate_config(p);
    std::mt19937_64 rng(8);
    Layer a = test::make_layer(0, LayerKind::FC, 1, 64, 8, 1, rng, 100.0, 5.0);
    Layer b = a;
    b.desc.id = b.weights.layer_id = 1;
    Layer c = a;
    c.desc.id = c.weights.layer_id = 2;
    const NetworkModel net = net_of({a, b, c});
    const Metrics br = simulate(aras_schedule(net, cfg, ArasOptions::br()), net, cfg);
    const Metrics brw = simulate(aras_schedule(net, cfg, ArasOptions::brw()), net, cfg);
    CHECK(brw.total_pulses == br.total_pulses);
}

TEST_CASE("VGG-16 prefix: every layer is written before the first compute")
{
    const ValidatedConfig cfg = default_config();
    const NetworkModel net = load_network(test::data_path("networks/vgg16_prefix9.json"));
    const Schedule base = aras_schedule(net, cfg, ArasOptions::base());
    const auto first_compute = std::find_if(base.instrs.begin(), base.instrs.end(),
                                            [](auto& i) { return i.kind == InstrKind::ComputeLayerSegment; });
    std::set<int> written;
    for (auto it = base.instrs.begin(); it != first_compute; ++it)
        if (it->kind == InstrKind::WriteCrossbar)
            written.insert(it->layer);
    CHECK(written.size() == 9);

    const Schedule br = aras_schedule(net, cfg, ArasOptions::br());
    REQUIRE_FALSE(br.replication_plans.empty());
    const ReplicationPlan& p = br.replication_plans.front();
    CHECK(p.branch == ReplicationBranch::Window);
    CHECK(p.initial_window == 9);
    CHECK(p.iterations >= 1);
    CHECK(p.rows_used() <= cfg.total_pe_rows());
    CHECK(makespan(br, net, cfg) <= makespan(base, net, cfg));
}

TEST_CASE("annotation counts every programmed cell")
{
    const ValidatedConfig cfg = validate_config(test::small_params());
    const NetworkModel net = test::random_network(42, 4, 6);
    Schedule s = aras_schedule(net, cfg, ArasOptions::brw());
    annotate_deltas(s, net, cfg);
    CHECK(s.annotated);
    std::uint64_t cells = 0;
    for (std::uint64_t c : s.writes_per_cell_histogram)
        cells += c;
    CHECK(cells == static_cast<std::uint64_t>(cfg.total_crossbars()) * 32 * 32);
    CHECK(s.max_writes_per_cell + 1 == s.writes_per_cell_histogram.size());
}

TEST_CASE("disjoint means: shifting saves pulses when layer 2 overwrites layer 1")
{
    const ValidatedConfig cfg = validate_config(test::small_params(1));
    std::mt19937_64 rng(12);
    const NetworkModel net = net_of({test::make_layer(0, LayerKind::Conv, 3, 16, 16, 8, rng, 70.0, 5.0),
                                     test::make_layer(1, LayerKind::Conv, 3, 16, 16, 8, rng, 180.0, 5.0)});
    const Schedule brw = aras_schedule(net, cfg, ArasOptions::brw());
    REQUIRE(brw.shift);
    CHECK(brw.shift->applied());
    CHECK(simulate(brw, net, cfg).total_pulses < simulate(aras_schedule(net, cfg, ArasOptions::br()), net, cfg).total_pulses);
}
