#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "darforge/errors.hpp"
#include "darforge/model_zoo.hpp"
#include "test_helpers.hpp"

using namespace darforge;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("canonical specs form a graded triple with exact parameter counts") {
    const auto specs = canonical_specs();
    REQUIRE(specs.size() == 3);
    CHECK(specs[0].name == "dar_small");
    CHECK(specs[1].name == "dar_medium");
    CHECK(specs[2].name == "dar_large");
    CHECK(specs[0].param_count() == 51082);
    CHECK(specs[1].param_count() == 193466);
    CHECK(specs[2].param_count() == 513458);
    CHECK(specs[0].param_count() < specs[1].param_count());
    CHECK(specs[1].param_count() < specs[2].param_count());
    for (const auto& s : specs) {
        CHECK(s.input_shape == std::vector<int>{3, 32, 32});
        CHECK(s.num_classes == 10);
    }
    CHECK_THROWS_AS(spec_by_name("dar_tiny"), std::invalid_argument);
}

TEST_CASE("conv parameter arithmetic: 3x3, 1 to 8 channels, with bias") {
    const Layer l = Layer::conv2d(1, 8, 3, 1, 1);
    CHECK(l.param_count() == 3 * 3 * 1 * 8 + 8);
    CHECK(l.param_count() == 80);
}

TEST_CASE("instantiate is deterministic per seed") {
    const ModelSpec& spec = spec_by_name("dar_small");
    const Model a = instantiate(spec, 7);
    const Model b = instantiate(spec, 7);
    const Model c = instantiate(spec, 8);
    bool same = true, diff = false;
    for (size_t i = 0; i < a.layers.size(); ++i) {
        same = same && dftest::bits_equal(a.layers[i].weight, b.layers[i].weight);
        diff = diff || !dftest::bits_equal(a.layers[i].weight, c.layers[i].weight);
    }
    CHECK(same);
    CHECK(diff);
    CHECK(a.param_count() == spec.param_count());
}

TEST_CASE("train_model contract checks") {
    const LabeledDataset ds = make_synthetic_dataset(10, 3);
    const ModelSpec& spec = spec_by_name("dar_small");
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(train_model(spec, ds, cfg), std::invalid_argument);
    cfg.epochs = 1;
    cfg.lr = 0.0f;
    CHECK_THROWS_AS(train_model(spec, ds, cfg), std::invalid_argument);
    cfg.lr = 0.05f;
    CHECK_THROWS_AS(train_model(spec, LabeledDataset{}, cfg), std::invalid_argument);
    const TrainReport r = train_model(spec, ds, cfg);
    CHECK(r.epoch_accuracy.size() == 1);
    CHECK(r.epoch_loss.size() == 1);
}

TEST_CASE("training is deterministic and learns the synthetic corpus") {
    const LabeledDataset train = make_synthetic_dataset(400, 11);
    const LabeledDataset test = make_synthetic_dataset(100, 12);
    const ModelSpec& spec = spec_by_name("dar_small");
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.lr = 0.05f;
    cfg.batch_size = 16;
    cfg.seed = 5;
    const TrainReport a = train_model(spec, train, cfg);
    const TrainReport b = train_model(spec, train, cfg);
    for (size_t i = 0; i < a.model.layers.size(); ++i) {
        CHECK(dftest::bits_equal(a.model.layers[i].weight, b.model.layers[i].weight));
        CHECK(dftest::bits_equal(a.model.layers[i].bias, b.model.layers[i].bias));
    }
    const EvalResult ev = evaluate(a.model, test);
    CHECK(ev.accuracy >= 0.6f); // single-epoch smoke bound
}

TEST_CASE("evaluate: single correct item with known confidence") {
    // zero weights, bias (ln 9, 0) make the softmax exactly (0.9, 0.1)
    Model m;
    m.name = "fixed";
    m.input_shape = {1, 2, 2};
    m.num_classes = 2;
    m.layers = {Layer::flatten(), Layer::dense(4, 2), Layer::softmax_xent()};
    m.layers[1].bias = Tensor({2}, {std::log(9.0f), 0.0f});
    m.validate();

    LabeledDataset ds;
    ds.class_names = {"a", "b"};
    ds.images.push_back(Tensor({1, 2, 2}));
    ds.labels.push_back(0);
    const EvalResult ev = evaluate(m, ds);
    CHECK(ev.accuracy == 1.0f);
    CHECK(ev.mean_true_class_confidence == doctest::Approx(0.9).epsilon(1e-5));
    CHECK_THROWS_AS(evaluate(m, LabeledDataset{}), std::invalid_argument);
}

TEST_CASE("untrained model sits at chance accuracy") {
    const Model m = instantiate(spec_by_name("dar_small"), 99);
    const LabeledDataset ds = make_synthetic_dataset(500, 21);
    const EvalResult ev = evaluate(m, ds);
    CHECK(ev.accuracy >= 0.05f);
    CHECK(ev.accuracy <= 0.15f);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    const Model m = instantiate(spec_by_name("dar_small"), 13);
    const auto bytes = serialize_checkpoint(m);
    const Model r = deserialize_checkpoint(bytes);
    CHECK(r.name == m.name);
    for (size_t i = 0; i < m.layers.size(); ++i) {
        CHECK(dftest::bits_equal(r.layers[i].weight, m.layers[i].weight));
        CHECK(dftest::bits_equal(r.layers[i].bias, m.layers[i].bias));
    }

    const std::string path = temp_path("darforge_ckpt_test.ckpt");
    save_checkpoint(m, path);
    const Model l = load_checkpoint(path);
    CHECK(dftest::bits_equal(l.layers[0].weight, m.layers[0].weight));
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint integrity failures name the field") {
    const Model m = instantiate(spec_by_name("dar_small"), 14);
    auto bytes = serialize_checkpoint(m);

    SUBCASE("payload byte flip fails the checksum") {
        bytes[bytes.size() / 2] ^= 0x40;
        try {
            deserialize_checkpoint(bytes);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(e.field() == "checksum");
        }
    }
    SUBCASE("truncation is a diagnostic, not a crash") {
        for (size_t cut : {size_t{0}, size_t{3}, size_t{9}, bytes.size() / 2, bytes.size() - 1})
            CHECK_THROWS_AS(deserialize_checkpoint(std::span(bytes.data(), cut)),
                            IntegrityError);
    }
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        try {
            deserialize_checkpoint(bytes);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(e.field() == "magic");
        }
    }
    SUBCASE("bad version") {
        bytes[4] = 99;
        try {
            deserialize_checkpoint(bytes);
            FAIL("expected IntegrityError");
        } catch (const IntegrityError& e) {
            CHECK(e.field() == "version");
        }
    }
    SUBCASE("unknown spec name is rejected") {
        bytes[12] = 'x'; // corrupt a name byte
        CHECK_THROWS_AS(deserialize_checkpoint(bytes), IntegrityError);
    }
}

TEST_CASE("crc32 matches the standard test vector") {
    const char* s = "123456789";
    CHECK(crc32(std::span(reinterpret_cast<const uint8_t*>(s), 9)) == 0xCBF43926u);
}
