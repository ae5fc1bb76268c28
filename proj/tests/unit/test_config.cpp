#include "bridgekit/config.hpp"
#include "doctest.h"

using namespace bridgekit;

TEST_CASE("parse and format round trip") {
    const auto c = parse_config(
        "# toy run\n"
        "task = shapes16\n"
        "T = 32   # steps\n"
        "gamma = 1.5\n"
        "variant = regular\n"
        "net = tiny_unet\n"
        "lr = 0.0003\n"
        "no_source_guidance = true\n"
        "\n"
        "seed = 18446744073709551615\n");
    CHECK(c.task == Task::Shapes16);
    CHECK(c.schedule.T == 32);
    CHECK(c.schedule.gamma == 1.5);
    CHECK(c.schedule.variant == Variant::RegularBridge);
    CHECK(c.net.kind == NetKind::TinyUnet);
    CHECK(c.train.lr == 0.0003);
    CHECK(c.train.no_source_guidance);
    CHECK(c.seed == 18446744073709551615ULL);
    CHECK(c.train.lambda1 == 1.0);

    const std::string text = format_config(c);
    CHECK(format_config(parse_config(text)) == text);
    CHECK(parse_config(text).train.lr == c.train.lr);
}

TEST_CASE("defaults") {
    const ExperimentConfig c;
    CHECK(c.train.lambda1 == 1.0);
    CHECK(c.train.lambda2 == 1.0);
    CHECK(c.train.lr == 1e-4);
    CHECK(c.train.adam_beta1 == 0.5);
    CHECK(c.train.adam_beta2 == 0.9);
    CHECK(c.train.r_train == 2);
    CHECK(c.sampler.rel_tol == 0.01);
    CHECK(c.sampler.r_max == 4);
    CHECK(c.net.time_embed_dim == 256);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("rejections name the offending key") {
    CHECK_THROWS_WITH_AS(parse_config("lamda1 = 2\n"), doctest::Contains("lamda1"), Error);
    CHECK_THROWS_WITH_AS(parse_config("T = ten\n"), doctest::Contains("'T'"), Error);
    CHECK_THROWS_WITH_AS(parse_config("no_soft_prior = maybe\n"), doctest::Contains("no_soft_prior"), Error);
    CHECK_THROWS_WITH_AS(parse_config("just words\n"), doctest::Contains("line 1"), Error);
    try {
        parse_config("bogus = 1\n");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::Config);
    }
    ExperimentConfig c;
    c.train.lambda2 = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.train.lr = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(config_key_docs().find("no_self_consistency") != std::string::npos);
}
