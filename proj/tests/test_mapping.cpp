#include "aras/mapping.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace aras;

namespace
{

LayerDescriptor conv(int k, int cin, int cout, int hw, int pad = 1)
{
    LayerDescriptor d;
    d.kind = LayerKind::Conv;
    d.kernel_h = d.kernel_w = k;
    d.in_channels = cin;
    d.out_channels = cout;
    d.input_h = d.input_w = hw;
    d.padding = pad;
    return d;
}

LayerDescriptor fc(int in, int out)
{
    LayerDescriptor d;
    d.kind = LayerKind::FC;
    d.in_channels = in;
    d.out_channels = out;
    return d;
}

}  // namespace

TEST_CASE("weight decomposition into 2-bit cells")
{
    CHECK(decompose_weight_to_cells(180, 8, 2) == std::vector<int>{0, 1, 3, 2});
    CHECK(decompose_weight_to_cells(0, 8, 2) == std::vector<int>{0, 0, 0, 0});
    CHECK(decompose_weight_to_cells(255, 8, 2) == std::vector<int>{3, 3, 3, 3});
    CHECK(compose_cells_to_weight({0, 1, 3, 2}, 2) == 180);
    CHECK(compose_cells_to_weight({0, 0, 0, 0}, 2) == 0);
    for (int bpc : {1, 2, 4})
        for (int w = 0; w < 256; ++w)
            CHECK(compose_cells_to_weight(decompose_weight_to_cells(w, 8, bpc), bpc) == w);
    CHECK_THROWS(decompose_weight_to_cells(256, 8, 2));
}

TEST_CASE("resource requirements")
{
    const ValidatedConfig cfg = default_config();
    const ResourceRequirement a = map_layer(conv(3, 64, 128, 56), cfg);
    CHECK(a.vertical_slices == 5);
    CHECK(a.horizontal_slices == 4);
    CHECK(a.column_groups == 1);
    CHECK(a.pe_rows_needed == 5);
    CHECK(a.crossbars() == 20);

    const ResourceRequirement b = map_layer(fc(128, 32), cfg);
    CHECK(b.vertical_slices == 1);
    CHECK(b.horizontal_slices == 1);
    CHECK(b.pe_rows_needed == 1);
    CHECK(b.num_windows == 1);
    CHECK_FALSE(b.is_conv);

    const ResourceRequirement c = map_layer(conv(3, 3, 64, 224), cfg);
    CHECK(c.num_windows == 50176);
    CHECK(c.pe_rows_needed == 1);

    const ResourceRequirement d = map_layer(fc(25088, 4096), cfg);
    CHECK(d.vertical_slices == 196);
    CHECK(d.horizontal_slices == 128);
    CHECK(d.column_groups == 32);
    CHECK(d.pe_rows_needed == 6272);
}

TEST_CASE("compute latency")
{
    const ValidatedConfig cfg = default_config();
    const ResourceRequirement c = map_layer(conv(3, 3, 64, 224), cfg);
    CHECK(layer_compute_latency(c, 1, cfg) == 38535168);
    CHECK(layer_compute_latency(c, 4, cfg) == 9633792);
    CHECK(layer_compute_latency(map_layer(fc(128, 32), cfg), 1, cfg) == 768);
    CHECK(layer_compute_latency(c, 3, cfg) == (50176 + 2) / 3 * 768);
    CHECK_THROWS(layer_compute_latency(c, 0, cfg));
}

TEST_CASE("one kernel of four weights lands in the top-left corner")
{
    AcceleratorConfig p = default_accelerator_config();
    p.crossbar_rows = 8;
    p.crossbar_cols = 8;
    const ValidatedConfig cfg = validate_config(p);
    Layer l;
    l.desc = fc(4, 1);
    l.weights = {0, 1, 4, 1, 1, {255, 255, 255, 255}};
    const ResourceRequirement req = map_layer(l.desc, cfg);
    std::vector<std::uint8_t> cells(64, 9);
    fill_slice_cells(l, req, 0, 0, cfg, cells);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            CHECK(cells[r * 8 + c] == ((r < 4 && c < 4) ? 3 : 0));
    CHECK(slice_populated_cells(l.desc, req, 0, 0, cfg) == 16);
}

TEST_CASE("kernel overflow spills into the next horizontal slice")
{
    const ValidatedConfig cfg = default_config();
    std::mt19937_64 rng(3);
    const Layer l = test::make_layer(0, LayerKind::FC, 1, 16, 33, 1, rng);
    const ResourceRequirement req = map_layer(l.desc, cfg);
    REQUIRE(req.horizontal_slices == 2);
    CHECK(slice_populated_cells(l.desc, req, 0, 0, cfg) == 16u * 32 * 4);
    CHECK(slice_populated_cells(l.desc, req, 0, 1, cfg) == 16u * 1 * 4);

    std::vector<std::uint8_t> cells;
    fill_slice_cells(l, req, 0, 1, cfg, cells);
    const std::vector<int> digits = decompose_weight_to_cells(l.weights.values[32 * 16 + 5], 8, 2);
    for (int t = 0; t < 4; ++t)
        CHECK(cells[5 * 128 + t] == digits[t]);
    CHECK(cells[5 * 128 + 4] == 0);
}

TEST_CASE("images round-trip to the original tensor")
{
    AcceleratorConfig p = default_accelerator_config();
    p.crossbar_rows = 16;
    p.crossbar_cols = 16;
    const ValidatedConfig cfg = validate_config(p);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial)
    {
        std::uniform_int_distribution<int> ch(1, 12);
        const Layer l = test::make_layer(0, trial % 3 ? LayerKind::Conv : LayerKind::FC, 3, ch(rng), ch(rng), 5, rng,
                                         128.0, 60.0);
        const ResourceRequirement req = map_layer(l.desc, cfg);
        std::vector<CrossbarCoord> where;
        for (int i = 0; i < req.crossbars(); ++i)
            where.push_back({i / 6, i % 6, 0});
        const std::vector<CellImage> images = build_cell_images(l, where, cfg);
        REQUIRE(images.size() == static_cast<std::size_t>(req.crossbars()));
        std::uint64_t populated = 0;
        for (int v = 0; v < req.vertical_slices; ++v)
            for (int h = 0; h < req.horizontal_slices; ++h)
                populated += slice_populated_cells(l.desc, req, v, h, cfg);
        CHECK(populated == l.desc.weight_count() * 4);
        CHECK(recover_weights(l, images, cfg).values == l.weights.values);
    }
}

TEST_CASE("shifted fill clips at the range ends")
{
    const ValidatedConfig cfg = default_config();
    Layer l;
    l.desc = fc(2, 1);
    l.weights = {0, 1, 2, 1, 1, {250, 3}};
    const ResourceRequirement req = map_layer(l.desc, cfg);
    std::vector<std::uint8_t> up, down;
    fill_slice_cells(l, req, 0, 0, cfg, up, 10);
    fill_slice_cells(l, req, 0, 0, cfg, down, -10);
    for (int t = 0; t < 4; ++t)
    {
        CHECK(up[t] == 3);
        CHECK(down[128 + t] == 0);
    }
}
