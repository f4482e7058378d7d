#include "aras/weight_reuse.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace aras;

namespace
{

QuantizedWeights tensor(std::vector<std::uint8_t> values)
{
    QuantizedWeights w;
    w.out_channels = 1;
    w.in_channels = static_cast<int>(values.size());
    w.values = std::move(values);
    return w;
}

QuantizedWeights gaussian(std::mt19937_64& rng, double mean, double sd, std::size_t n)
{
    std::normal_distribution<double> g(mean, sd);
    std::vector<std::uint8_t> v(n);
    for (auto& x : v)
        x = static_cast<std::uint8_t>(std::clamp(std::lround(g(rng)), 0L, 255L));
    return tensor(std::move(v));
}

CellDistribution uniform_distribution(const ValidatedConfig& cfg)
{
    WeightHistogram h{};
    h.fill(1);
    return cell_distribution(h, cfg);
}

CellDistribution point_mass(int w, const ValidatedConfig& cfg)
{
    WeightHistogram h{};
    h[w] = 1;
    return cell_distribution(h, cfg);
}

NetworkModel two_layer(double m0, double s0, double m1, double s1, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    NetworkModel net;
    net.layers.push_back(test::make_layer(0, LayerKind::Conv, 3, 32, 32, 8, rng, m0, s0));
    net.layers.push_back(test::make_layer(1, LayerKind::Conv, 3, 32, 32, 8, rng, m1, s1));
    return net;
}

std::uint64_t loop_pulses(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b)
{
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += static_cast<std::uint64_t>(std::abs(int(b[i]) - int(a[i])));
    return s;
}

std::vector<std::uint8_t> random_cells(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_int_distribution<int> d(0, 3);
    std::vector<std::uint8_t> v(n);
    for (auto& x : v)
        x = static_cast<std::uint8_t>(d(rng));
    return v;
}

}  // namespace

TEST_CASE("cell distributions")
{
    const ValidatedConfig cfg = default_config();
    const CellDistribution u = uniform_distribution(cfg);
    REQUIRE(u.positions() == 4);
    for (const auto& pos : u.p)
        for (double p : pos)
            CHECK(p == doctest::Approx(0.25));

    const CellDistribution pm = point_mass(180, cfg);
    const std::vector<int> digits = decompose_weight_to_cells(180, 8, 2);
    for (int i = 0; i < 4; ++i)
        CHECK(pm.p[i][digits[i]] == 1.0);

    std::mt19937_64 rng(1);
    const CellDistribution g = cell_distribution(gaussian(rng, 160.0, 10.0, 100000), cfg);
    CHECK(g.p[3][2] > 0.99);

    CHECK_THROWS(cell_distribution(QuantizedWeights{}, cfg));
}

TEST_CASE("skipping ratio examples")
{
    const ValidatedConfig cfg = default_config();
    const CellDistribution u = uniform_distribution(cfg);
    const CellDistribution two = point_mass(0b10101010, cfg);
    for (int pos = 1; pos <= 4; ++pos)
    {
        CHECK(skipping_ratio(u, u, pos) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(skipping_ratio(two, two, pos) == 1.0);
        CHECK(skipping_ratio(u, two, pos) == doctest::Approx(0.25).epsilon(1e-12));
    }
    CHECK_THROWS(skipping_ratio(u, u, 0));
    CHECK_THROWS(skipping_ratio(u, u, 5));
}

TEST_CASE("skipping ratio properties")
{
    const ValidatedConfig cfg = default_config();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> m(20.0, 235.0);
    std::uniform_real_distribution<double> s(1.0, 40.0);
    for (int trial = 0; trial < 50; ++trial)
    {
        const CellDistribution a = cell_distribution(gaussian(rng, m(rng), s(rng), 2000), cfg);
        const CellDistribution b = cell_distribution(gaussian(rng, m(rng), s(rng), 2000), cfg);
        for (int pos = 1; pos <= 4; ++pos)
        {
            const double r = skipping_ratio(a, b, pos);
            CHECK(r >= 0.0);
            CHECK(r <= 1.0 + 1e-12);
            CHECK(r == doctest::Approx(skipping_ratio(b, a, pos)).epsilon(1e-12));
        }
    }
    // A non-degenerate distribution never reaches 1 against itself.
    const CellDistribution a = cell_distribution(tensor({10, 200}), cfg);
    CHECK(skipping_ratio(a, a, 4) < 1.0);
}

TEST_CASE("shift examples")
{
    const ShiftResult a = shift_weights(tensor({110, 130}), 96, 8);
    CHECK(a.offset == -24);
    CHECK(a.weights.values == std::vector<std::uint8_t>{86, 106});
    CHECK(a.clip_fraction == 0.0);

    const ShiftResult b = shift_weights(tensor({250, 10}), 140, 8);
    CHECK(b.offset == 10);
    CHECK(b.weights.values[0] == 255);
    CHECK(b.clip_fraction == 0.5);
    CHECK(b.mean_abs_clip_error == 2.5);

    const QuantizedWeights w = tensor({5, 96, 187});
    const ShiftResult c = shift_weights(w, 96, 8);
    CHECK(c.offset == 0);
    CHECK(c.weights.values == w.values);
    CHECK(c.clip_fraction == 0.0);
}

TEST_CASE("center selection keeps already centered layers")
{
    const ValidatedConfig cfg = default_config();
    const NetworkModel net = two_layer(96.0, 0.1, 96.0, 0.1, 5);
    const ShiftPlan plan = select_center(net, cfg);
    CHECK_FALSE(plan.fallback);
    CHECK(plan.center == 96);
    CHECK(plan.offset(0) == 0);
    CHECK(std::abs(plan.offset(1)) <= 1);
    CHECK(plan.evaluations.size() == default_centers().size());
}

TEST_CASE("a shared center aligns two distant Gaussian layers")
{
    const ValidatedConfig cfg = default_config();
    const NetworkModel net = two_layer(70.0, 5.0, 180.0, 5.0, 9);
    const ShiftPlan plan = select_center(net, cfg);
    REQUIRE_FALSE(plan.fallback);
    CHECK(plan.offset(0) == 0);
    const CenterEvaluation& best =
        *std::find_if(plan.evaluations.begin(), plan.evaluations.end(), [&](auto& e) { return e.center == plan.center; });
    CHECK(best.score > unshifted_score(net, cfg));

    // Oracle: top-two-cell skipping before and after shifting the second layer.
    const CellDistribution d0 = cell_distribution(net.layers[0].weights, cfg);
    const CellDistribution before = cell_distribution(net.layers[1].weights, cfg);
    const CellDistribution after =
        cell_distribution(shift_weights(net.layers[1].weights, plan.center, 8).weights, cfg);
    const double s_before = skipping_ratio(d0, before, 3) + skipping_ratio(d0, before, 4);
    const double s_after = skipping_ratio(d0, after, 3) + skipping_ratio(d0, after, 4);
    CHECK(s_after > s_before);
}

TEST_CASE("no surviving center falls back to zero offsets")
{
    const ValidatedConfig cfg = default_config();
    NetworkModel net = two_layer(96.0, 3.0, 96.0, 3.0, 5);
    auto& v = net.layers[1].weights.values;
    v[0] = 0;
    v[1] = 255;
    const ShiftPlan plan = select_center(net, cfg, 0.0, {88, 104, 160});
    CHECK(plan.fallback);
    for (const LayerShift& s : plan.layers)
        CHECK(s.offset == 0);

    NetworkModel single;
    single.layers.push_back(net.layers[0]);
    CHECK_THROWS(select_center(single, cfg));
}

TEST_CASE("cell delta examples")
{
    CellDeltaMatrix d = compute_cell_deltas(std::vector<std::uint8_t>{3, 0}, std::vector<std::uint8_t>{1, 3}, 1, 2);
    CHECK(d.at(0, 0) == -2);
    CHECK(d.at(0, 1) == 3);
    CHECK(d.max_decrease[0] == 2);
    CHECK(d.max_increase[0] == 3);
    CHECK(total_pulses(d) == 5);

    const std::vector<std::uint8_t> same = {1, 2, 3, 0, 1, 2};
    d = compute_cell_deltas(same, same, 2, 3);
    CHECK(total_pulses(d) == 0);
    for (auto x : d.delta)
        CHECK(x == 0);

    AcceleratorConfig p = default_accelerator_config();
    p.crossbar_rows = 8;
    p.crossbar_cols = 8;
    const ValidatedConfig cfg = validate_config(p);
    Layer l;
    l.desc.kind = LayerKind::FC;
    l.desc.in_channels = 3;
    l.desc.out_channels = 2;
    l.weights = {0, 2, 3, 1, 1, std::vector<std::uint8_t>(6, 255)};
    const std::vector<CellImage> img = build_cell_images(l, {CrossbarCoord{}}, cfg);
    const CellImage erased(CrossbarCoord{}, 8, 8);
    d = compute_cell_deltas(erased, img[0]);
    int plus3 = 0;
    for (auto x : d.delta)
    {
        CHECK((x == 0 || x == 3));
        plus3 += x == 3;
    }
    CHECK(plus3 == 24);

    CHECK_THROWS(compute_cell_deltas(std::vector<std::uint8_t>(4), std::vector<std::uint8_t>(6), 2, 2));
}

TEST_CASE("pulse count properties")
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial)
    {
        const auto a = random_cells(rng, 64);
        const auto b = random_cells(rng, 64);
        const auto c = random_cells(rng, 64);
        const std::uint64_t ab = total_pulses(compute_cell_deltas(a, b, 8, 8));
        CHECK(ab == loop_pulses(a, b));
        CHECK(ab == total_pulses(compute_cell_deltas(b, a, 8, 8)));
        CHECK(total_pulses(compute_cell_deltas(a, c, 8, 8)) <= ab + total_pulses(compute_cell_deltas(b, c, 8, 8)));
    }
}

TEST_CASE("compensated dot product")
{
    QuantParams qp;
    qp.weight_scale = 3.0;
    qp.weight_zero_point = -120;
    qp.act_scale = 5.0;
    qp.act_zero_point = 2;
    qp.bias = {0.75};
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> xd(0, 255);
    std::uniform_int_distribution<int> wd(30, 220);
    std::vector<int> x(64), w(64), shifted(64);
    for (int i = 0; i < 64; ++i)
    {
        x[i] = xd(rng);
        w[i] = wd(rng);
    }

    const DotProduct ref = reference_dot_product(x, w, qp);
    const DotProduct same = compensated_dot_product(x, w, 0, qp);
    CHECK(same.accumulation == ref.accumulation);
    CHECK(same.value == ref.value);

    for (int i = 0; i < 64; ++i)
        shifted[i] = w[i] - 24;
    const DotProduct comp = compensated_dot_product(x, shifted, -24, qp);
    CHECK(comp.accumulation == ref.accumulation);
    CHECK(comp.value == ref.value);

    // Clip one weight: the error is the missing amount times its activation term.
    shifted[0] = 0;
    w[0] = 10;
    const DotProduct r2 = reference_dot_product(x, w, qp);
    const DotProduct c2 = compensated_dot_product(x, shifted, -24, qp);
    const std::int64_t clip_error = 0 - (10 - 24);
    CHECK(c2.accumulation - r2.accumulation == clip_error * (x[0] + qp.act_zero_point));
    CHECK(c2.value - r2.value ==
          doctest::Approx(static_cast<double>(clip_error * (x[0] + qp.act_zero_point)) / 15.0));

    CHECK_THROWS(compensated_dot_product(x, std::vector<int>(3), 0, qp));
}
