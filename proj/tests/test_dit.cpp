#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "gradcheck.hpp"
#include "sama/checkpoint.hpp"
#include "sama/dit.hpp"
#include "sama/errors.hpp"
#include "sama/text.hpp"
#include "sama/vtensor.hpp"
#include "test_util.hpp"

using namespace sama;

namespace {

DiTConfig small_config() {
    DiTConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.model_dim = 24;
    cfg.ff_dim = 48;
    return cfg;
}

SemanticConfig small_semantic() {
    SemanticConfig sem;
    sem.anchors_n = 1;
    sem.local_tokens_m = 4;
    sem.feature_dim = 8;
    sem.proj_hidden = 12;
    sem.encoder_patch = 2;
    return sem;
}

AssembledSequence small_sequence(Rng& rng, bool with_semantic, int dim = 24) {
    const TokenGrid grid{2, 2, 2};
    const Tensor source = Tensor::randn({grid.count(), dim}, rng);
    const Tensor target = Tensor::randn({grid.count(), dim}, rng);
    std::optional<Tensor> semantic;
    if (with_semantic) semantic = Tensor::randn({5, dim}, rng);
    return assemble_sequence(source, grid, semantic, target, grid);
}

void randomize_params(ModelParams& params, std::uint64_t seed, float stdev = 0.05f) {
    Rng rng(seed);
    for (auto& [name, tensor] : params.named_parameters()) {
        auto data = tensor->mutable_data();
        for (float& v : data) v = static_cast<float>(rng.normal()) * stdev;
    }
}

}  // namespace

TEST_CASE("default layout arithmetic: 256 + 65 + 256") {
    Rng rng(1);
    const TokenGrid grid{4, 8, 8};
    const Tensor source = Tensor::randn({256, 96}, rng);
    const Tensor semantic = Tensor::randn({65, 96}, rng);
    const Tensor target = Tensor::randn({256, 96}, rng);
    const AssembledSequence seq = assemble_sequence(source, grid, semantic, target, grid);

    CHECK(seq.layout.total() == 577);
    CHECK(seq.layout.source_offset == 0);
    CHECK(seq.layout.semantic_offset == 256);
    CHECK(seq.layout.target_offset == 321);

    std::array<int, 3> histogram{};
    for (int id : seq.type_ids) histogram[static_cast<std::size_t>(id)]++;
    CHECK(histogram[0] == 256);
    CHECK(histogram[1] == 65);
    CHECK(histogram[2] == 256);
}

TEST_CASE("disabled semantic segment leaves two segments") {
    Rng rng(2);
    const TokenGrid grid{4, 8, 8};
    const Tensor source = Tensor::randn({256, 96}, rng);
    const Tensor target = Tensor::randn({256, 96}, rng);
    const AssembledSequence seq = assemble_sequence(source, grid, std::nullopt, target, grid);
    CHECK(seq.layout.total() == 512);
    CHECK(seq.layout.semantic_len == 0);
    std::array<int, 3> histogram{};
    for (int id : seq.type_ids) histogram[static_cast<std::size_t>(id)]++;
    CHECK(histogram[0] == 256);
    CHECK(histogram[1] == 0);
    CHECK(histogram[2] == 256);
}

TEST_CASE("assemble rejects mismatched token widths") {
    Rng rng(3);
    const TokenGrid grid{1, 2, 2};
    const Tensor source = Tensor::randn({4, 24}, rng);
    const Tensor target = Tensor::randn({4, 12}, rng);
    CHECK_THROWS_AS(assemble_sequence(source, grid, std::nullopt, target, grid), ShapeError);
}

TEST_CASE("forward preserves the sequence shape") {
    const DiTConfig cfg = small_config();
    const ModelParams params = ModelParams::init(cfg, small_semantic(), 7);
    Rng rng(4);
    const AssembledSequence seq = small_sequence(rng, true);
    const std::vector<int> instr = text_vocab().encode("a red square moves right");
    const ForwardResult out = dit_forward(params, cfg, seq, 0.5, instr);
    CHECK(out.output.shape() == seq.tokens.shape());
    CHECK(out.final_hidden.shape() == seq.tokens.shape());
}

TEST_CASE("all-zero parameters produce all-zero outputs") {
    const DiTConfig cfg = small_config();
    ModelParams params = ModelParams::init(cfg, small_semantic(), 7);
    for (auto& [name, tensor] : params.named_parameters()) {
        auto data = tensor->mutable_data();
        std::fill(data.begin(), data.end(), 0.0f);
    }
    Rng rng(5);
    const AssembledSequence seq = small_sequence(rng, true);
    const ForwardResult out = dit_forward(params, cfg, seq, 0.25, {});
    for (float v : out.output.data()) CHECK(v == 0.0f);
}

TEST_CASE("type ids disambiguate identical token vectors") {
    const DiTConfig cfg = small_config();
    ModelParams params = ModelParams::init(cfg, small_semantic(), 7);
    randomize_params(params, 99);  // includes a non-zero type table

    Rng rng(6);
    const TokenGrid grid{1, 2, 2};
    const std::vector<float> row = [&] {
        std::vector<float> v(24);
        for (float& x : v) x = static_cast<float>(rng.normal());
        return v;
    }();
    std::vector<float> source_vals, target_vals;
    for (int i = 0; i < 4; ++i) {
        source_vals.insert(source_vals.end(), row.begin(), row.end());
        target_vals.insert(target_vals.end(), row.begin(), row.end());
    }
    const AssembledSequence seq =
        assemble_sequence(Tensor::from_data({4, 24}, source_vals), grid, std::nullopt,
                          Tensor::from_data({4, 24}, target_vals), grid);

    AssembledSequence swapped = seq;
    std::swap(swapped.type_ids[0], swapped.type_ids[4]);  // one source <-> one target

    const ForwardResult a = dit_forward(params, cfg, seq, 0.5, {});
    const ForwardResult b = dit_forward(params, cfg, swapped, 0.5, {});
    bool differs = false;
    for (std::int64_t i = 0; i < a.output.size(); ++i) {
        if (a.output.data()[static_cast<std::size_t>(i)] !=
            b.output.data()[static_cast<std::size_t>(i)]) {
            differs = true;
            break;
        }
    }
    CHECK(differs);
}

TEST_CASE("readout slices partition the output") {
    const DiTConfig cfg = small_config();
    const ModelParams params = ModelParams::init(cfg, small_semantic(), 8);
    Rng rng(7);
    const AssembledSequence seq = small_sequence(rng, true);
    const ForwardResult out = dit_forward(params, cfg, seq, 0.1, {});
    const VelocityReadout readout = readout_velocity(out.output, seq.layout);
    REQUIRE(readout.semantic.has_value());
    CHECK(readout.semantic->dim(0) == 5);
    CHECK(readout.target.dim(0) == 8);

    const Tensor source_rows = slice(out.output, 0, 0, seq.layout.source_len);
    const std::vector<Tensor> parts{source_rows, *readout.semantic, readout.target};
    const Tensor rebuilt = concat(parts, 0);
    CHECK(std::memcmp(rebuilt.data().data(), out.output.data().data(),
                      static_cast<std::size_t>(out.output.size()) * sizeof(float)) == 0);

    // degenerate layout: no semantic slice
    const AssembledSequence plain = small_sequence(rng, false);
    const ForwardResult out2 = dit_forward(params, cfg, plain, 0.1, {});
    CHECK_FALSE(readout_velocity(out2.output, plain.layout).semantic.has_value());
}

TEST_CASE("semantic head is an affine per-token map") {
    const SemanticConfig sem = small_semantic();
    const DiTConfig cfg = small_config();
    ModelParams params = ModelParams::init(cfg, sem, 9);
    Rng rng(8);
    const Tensor hidden = Tensor::randn({5, 24}, rng);

    // identity head reproduces its input
    {
        auto w = params.head_w.mutable_data();
        std::fill(w.begin(), w.end(), 0.0f);
        for (int i = 0; i < 24; ++i) w[static_cast<std::size_t>(i * 24 + i)] = 1.0f;
        auto b = params.head_b.mutable_data();
        std::fill(b.begin(), b.end(), 0.0f);
        const Tensor out = semantic_head(params, hidden);
        CHECK(l1_loss(out, hidden).item() == 0.0f);
    }
    // zero head emits the bias row
    {
        auto w = params.head_w.mutable_data();
        std::fill(w.begin(), w.end(), 0.0f);
        auto b = params.head_b.mutable_data();
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<float>(i) * 0.1f;
        const Tensor out = semantic_head(params, hidden);
        for (std::int64_t r = 0; r < out.dim(0); ++r) {
            for (std::int64_t c = 0; c < out.dim(1); ++c) {
                CHECK(out.data()[static_cast<std::size_t>(r * 24 + c)] ==
                      doctest::Approx(static_cast<float>(c) * 0.1f));
            }
        }
    }
    // gradient check through the head
    randomize_params(params, 100);
    Rng head_rng(9);
    const Tensor w = Tensor::randn({5, 24}, head_rng);
    const auto result = sama::test::grad_check(
        [&] { return sum_all(mul(semantic_head(params, hidden), w)); },
        {params.head_w, params.head_b});
    CHECK(result.max_rel < 1e-3);
}

TEST_CASE("full forward gradients match finite differences") {
    DiTConfig cfg = small_config();
    cfg.layers = 4;  // the composed-graph case: all four blocks on the tape
    const SemanticConfig sem = small_semantic();
    ModelParams params = ModelParams::init(cfg, sem, 10);
    randomize_params(params, 11);

    Rng rng(12);
    const AssembledSequence seq = small_sequence(rng, true);
    const std::vector<int> instr = text_vocab().encode("turn the red square green");
    Rng head_rng(13);
    const Tensor w = Tensor::randn(seq.tokens.shape(), head_rng);

    std::vector<Tensor> inputs;
    for (auto& [name, tensor] : params.named_parameters()) inputs.push_back(*tensor);
    const auto result = sama::test::grad_check(
        [&] {
            const ForwardResult out = dit_forward(params, cfg, seq, 0.37, instr);
            return sum_all(mul(out.output, w));
        },
        inputs, 1e-3f, 6);
    CHECK(result.max_rel < 1e-2);
}

TEST_CASE("permuting source tokens with their positions fixes other segments") {
    const DiTConfig cfg = small_config();
    ModelParams params = ModelParams::init(cfg, small_semantic(), 14);
    randomize_params(params, 15);

    Rng rng(16);
    const AssembledSequence seq = small_sequence(rng, true);
    AssembledSequence permuted = seq;
    std::vector<std::int64_t> perm(static_cast<std::size_t>(seq.layout.source_len));
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
        std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i) + 1))]);
    }
    const std::int64_t dim = seq.tokens.dim(1);
    std::vector<float> tokens(seq.tokens.data().begin(), seq.tokens.data().end());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const float* src = seq.tokens.data().data() + perm[i] * dim;
        std::copy_n(src, dim, tokens.begin() + static_cast<std::ptrdiff_t>(i) * dim);
        permuted.positions[i] = seq.positions[static_cast<std::size_t>(perm[i])];
    }
    permuted.tokens = Tensor::from_data(seq.tokens.shape(), std::move(tokens));

    const std::vector<int> instr = text_vocab().encode("remove the red square");
    const ForwardResult a = dit_forward(params, cfg, seq, 0.6, instr);
    const ForwardResult b = dit_forward(params, cfg, permuted, 0.6, instr);
    const std::size_t tail_offset = static_cast<std::size_t>(seq.layout.semantic_offset * dim);
    const std::size_t tail_len =
        static_cast<std::size_t>((seq.layout.semantic_len + seq.layout.target_len) * dim);
    CHECK(std::memcmp(a.output.data().data() + tail_offset, b.output.data().data() + tail_offset,
                      tail_len * sizeof(float)) == 0);
}

TEST_CASE("with a single segment both positional modes coincide at init") {
    DiTConfig te = small_config();
    DiTConfig shifted = small_config();
    shifted.positional = PositionalScheme::ShiftedPositions;
    const ModelParams params = ModelParams::init(te, small_semantic(), 17);

    // degenerate sequence: the source grid occupies everything, no other segments
    Rng rng(18);
    const TokenGrid grid{2, 2, 2};
    const Tensor source = Tensor::randn({8, 24}, rng);
    AssembledSequence seq = assemble_sequence(source, grid, std::nullopt,
                                              Tensor::randn({8, 24}, rng), grid);
    // keep only the source segment by reading source rows back out
    AssembledSequence single;
    single.tokens = slice(seq.tokens, 0, 0, 8);
    single.type_ids.assign(seq.type_ids.begin(), seq.type_ids.begin() + 8);
    single.positions.assign(seq.positions.begin(), seq.positions.begin() + 8);
    single.layout.source_len = 8;
    single.layout.semantic_offset = 8;
    single.layout.target_offset = 8;
    single.layout.target_len = 0;

    const ForwardResult a = dit_forward(params, te, single, 0.5, {});
    const ForwardResult b = dit_forward(params, shifted, single, 0.5, {});
    CHECK(std::memcmp(a.output.data().data(), b.output.data().data(),
                      static_cast<std::size_t>(a.output.size()) * sizeof(float)) == 0);
}

TEST_CASE("shifted mode separates segments without type embeddings") {
    DiTConfig shifted = small_config();
    shifted.positional = PositionalScheme::ShiftedPositions;
    shifted.shift_semantic = 64.0f;
    shifted.shift_target = 128.0f;
    ModelParams params = ModelParams::init(shifted, small_semantic(), 19);
    randomize_params(params, 20);
    // zero the type table: shifted mode must not depend on it
    auto table = params.type_table.mutable_data();
    std::fill(table.begin(), table.end(), 0.0f);

    Rng rng(21);
    const TokenGrid grid{1, 2, 2};
    const std::vector<float> row(24, 0.5f);
    std::vector<float> vals;
    for (int i = 0; i < 4; ++i) vals.insert(vals.end(), row.begin(), row.end());
    const AssembledSequence seq =
        assemble_sequence(Tensor::from_data({4, 24}, vals), grid, std::nullopt,
                          Tensor::from_data({4, 24}, vals), grid);
    const ForwardResult out = dit_forward(params, shifted, seq, 0.5, {});
    // identical content at identical grid coordinates still separates by segment
    bool differs = false;
    for (int i = 0; i < 24; ++i) {
        if (out.output.data()[static_cast<std::size_t>(i)] !=
            out.output.data()[static_cast<std::size_t>(4 * 24 + i)]) {
            differs = true;
            break;
        }
    }
    CHECK(differs);
}

TEST_CASE("forward validates t, vocabulary and width") {
    const DiTConfig cfg = small_config();
    const ModelParams params = ModelParams::init(cfg, small_semantic(), 22);
    Rng rng(23);
    const AssembledSequence seq = small_sequence(rng, false);
    CHECK_THROWS_AS(dit_forward(params, cfg, seq, 1.5, {}), ContractError);
    const std::vector<int> bad_ids{10000};
    CHECK_THROWS_AS(dit_forward(params, cfg, seq, 0.5, bad_ids), VocabError);
}

TEST_CASE("checkpoints round-trip bit-exactly and validate shapes") {
    sama::test::TempDir tmp("ckpt");
    const DiTConfig cfg = small_config();
    TrainConfig tc;
    tc.optimizer = "adam";
    tc.steps = 0;
    TrainState state = TrainState::init(
        DiTModel::init(cfg, small_semantic(), PatchSpec{2, 2, 2, 3}, 24), tc);
    state.step = 17;
    state.adam.t = 17;

    save_checkpoint(tmp.path / "ck", state);
    const TrainState loaded = load_checkpoint(tmp.path / "ck");
    CHECK(loaded.step == 17);
    CHECK(loaded.adam.t == 17);
    CHECK(loaded.model.config.model_dim == cfg.model_dim);

    const auto a = state.model.params.named_parameters();
    const auto b = loaded.model.params.named_parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(std::memcmp(a[i].second->data().data(), b[i].second->data().data(),
                          a[i].second->data().size() * sizeof(float)) == 0);
    }
    // saving the loaded state again reproduces identical containers
    save_checkpoint(tmp.path / "ck2", loaded);
    for (const auto& entry : std::filesystem::recursive_directory_iterator(tmp.path / "ck")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(entry.path(), tmp.path / "ck");
        std::ifstream f1(entry.path(), std::ios::binary);
        std::ifstream f2(tmp.path / "ck2" / rel, std::ios::binary);
        REQUIRE(f2.good());
        const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
    }

    // a wrong-shaped container fails the load
    VTensorData bad;
    bad.dims = {2, 2};
    bad.values = {1, 2, 3, 4};
    write_vtensor(tmp.path / "ck" / "params" / "input.w.vt", bad);
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "ck"), ConfigError);
}
