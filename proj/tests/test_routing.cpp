#include "doctest.h"

#include <cmath>
#include <optional>

#include "spacebind/errors.hpp"
#include "spacebind/gradcheck.hpp"
#include "spacebind/routing.hpp"
#include "spacebind/world.hpp"

#include "support.hpp"

using namespace spacebind;
using namespace testsupport;

namespace {

// registry over the tiny-world roster: anchor(IT,12*), at1(AT), pvt1(PVT), avt1(AVT)
EncoderRegistry tiny_registry() { return EncoderRegistry::build(tiny_world().spaces); }

// model over a freshly generated tiny world with untrained projectors
struct TinyModel {
    World world;
    EnsembleModel model;
};

TinyModel make_tiny_model(const WeightPolicy& policy) {
    TinyModel out{generate_world(tiny_world(90, 24)), {}};
    const WorldConfig& cfg = out.world.config;
    out.model.registry = EncoderRegistry::build(cfg.spaces);
    out.model.anchor_name = "anchor";
    out.model.anchor_dim = 12;
    BindConfig bind;
    bind.projector_hidden_dim = 8;
    for (const SpaceSpec& s : cfg.spaces)
        if (!s.is_anchor) out.model.bound.emplace(s.name, make_bound_space(s, 12, bind));
    out.model.policy = policy;
    return out;
}

// router whose sigmoid scores are the same constants for every input
Router constant_router(Modality m, std::size_t input_dim, std::size_t count,
                       const Vec& pre_activations) {
    Router r;
    r.modality = m;
    r.net = Perceptron(input_dim, 2, count, OutputActivation::Sigmoid);
    r.net.b2 = pre_activations;
    return r;
}

} // namespace

TEST_SUITE("routing") {

TEST_CASE("registry lists the anchor first and tags text provenance") {
    const EncoderRegistry reg = tiny_registry();
    CHECK(reg.count(Modality::Point3D) == 1);
    CHECK(reg.count(Modality::Audio) == 2);
    CHECK(reg.count(Modality::Image) == 3);
    CHECK(reg.count(Modality::Text) == 4);

    const auto& texts = reg.for_modality(Modality::Text);
    CHECK(texts[0].space == "anchor");
    CHECK(texts[1].space == "at1");
    CHECK(texts[2].space == "pvt1");
    CHECK(texts[3].space == "avt1");
    CHECK(*texts[0].text_provenance == Modality::Image);
    CHECK(*texts[1].text_provenance == Modality::Audio);
    CHECK(*texts[2].text_provenance == Modality::Point3D); // tri-modal default
    CHECK(*texts[3].text_provenance == Modality::Image);   // tri-modal default

    const auto& images = reg.for_modality(Modality::Image);
    CHECK(images[0].space == "anchor");
    CHECK_FALSE(images[0].text_provenance.has_value());

    // tri-modal provenance defaults can be overridden
    const EncoderRegistry alt =
        EncoderRegistry::build(tiny_world().spaces, Modality::Image, Modality::Audio);
    CHECK(*alt.for_modality(Modality::Text)[2].text_provenance == Modality::Image);
    CHECK(*alt.for_modality(Modality::Text)[3].text_provenance == Modality::Audio);
    CHECK_THROWS_AS(EncoderRegistry::build(tiny_world().spaces, Modality::Text, Modality::Image),
                    ConfigError);
}

TEST_CASE("high presets split the favored family then the rest uniformly") {
    // two audio-text and two image-text encoders, no anchor involved
    const std::vector<SpaceSpec> spaces = {
        {"at1", SpaceFamily::AudioText, 8, false},
        {"at2", SpaceFamily::AudioText, 8, false},
        {"vt1", SpaceFamily::ImageText, 8, false},
        {"vt2", SpaceFamily::ImageText, 8, false},
    };
    const EncoderRegistry reg = EncoderRegistry::build(spaces);
    REQUIRE(reg.count(Modality::Text) == 4);

    const ManualWeights at_high = manual_policy(ManualPreset::ATHigh, reg, 0.6);
    const Vec& text = at_high.weights[modality_index(Modality::Text)];
    REQUIRE(text.size() == 4);
    CHECK(text[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(text[1] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(text[2] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(text[3] == doctest::Approx(0.2).epsilon(1e-12));

    // modalities where every encoder is favored (audio) or none is (image)
    // degenerate to uniform
    const Vec& audio = at_high.weights[modality_index(Modality::Audio)];
    CHECK(audio == Vec{0.5, 0.5});
    const Vec& image = at_high.weights[modality_index(Modality::Image)];
    CHECK(image == Vec{0.5, 0.5});

    const ManualWeights mean = manual_policy(ManualPreset::Mean, reg);
    for (double w : mean.weights[modality_index(Modality::Text)])
        CHECK(w == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(manual_policy(ManualPreset::ATHigh, reg, 1.5), ConfigError);
}

TEST_CASE("vt-high favors the lone image-text tower in the tiny roster") {
    const EncoderRegistry reg = tiny_registry();
    const ManualWeights vt = manual_policy(ManualPreset::VTHigh, reg, 0.6);
    const Vec& text = vt.weights[modality_index(Modality::Text)];
    REQUIRE(text.size() == 4);
    CHECK(text[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(text[1] == doctest::Approx(0.4 / 3.0).epsilon(1e-12));
    CHECK(text[2] == doctest::Approx(0.4 / 3.0).epsilon(1e-12));
    CHECK(text[3] == doctest::Approx(0.4 / 3.0).epsilon(1e-12));

    const ManualWeights pvt = manual_policy(ManualPreset::PVTHigh, reg, 0.6);
    CHECK(pvt.weights[modality_index(Modality::Text)][2] == doctest::Approx(0.6));
    // the only point encoder belongs to the favored family: uniform fallback
    CHECK(pvt.weights[modality_index(Modality::Point3D)] == Vec{1.0});
}

TEST_CASE("explicit manual weights are validated") {
    const EncoderRegistry reg = tiny_registry();
    std::array<Vec, 4> weights;
    weights[0] = {1.0};
    weights[1] = {0.5, 0.5};
    weights[2] = {0.2, 0.3, 0.5};
    weights[3] = {0.25, 0.25, 0.25, 0.25};
    CHECK_NOTHROW(manual_policy(weights, reg));

    auto bad = weights;
    bad[3] = {0.5, 0.5, 0.25, -0.25};
    CHECK_THROWS_AS(manual_policy(bad, reg), ConfigError);
    bad = weights;
    bad[3] = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(manual_policy(bad, reg), ConfigError);
    bad = weights;
    bad[3] = {1.0};
    CHECK_THROWS_AS(manual_policy(bad, reg), ConfigError);
}

TEST_CASE("zero-initialized routers reproduce the mean ensemble") {
    const TinyModel routed = make_tiny_model(RouterSet{});
    EnsembleModel model = routed.model;
    RouteConfig cfg;
    cfg.router_hidden_dim = 16;
    model.policy = make_routers(model.registry, model.anchor_dim, cfg, true);

    EnsembleModel mean = routed.model;
    mean.policy = manual_policy(ManualPreset::Mean, mean.registry);

    const std::vector<std::size_t> rows = {0, 3, 7, 11, 23};
    for (Modality m : kModalities) {
        const Matrix a = embed(model, routed.world.store, m, rows);
        const Matrix b = embed(mean, routed.world.store, m, rows);
        REQUIRE(a.rows == rows.size());
        CHECK(max_abs_diff(a, b) < 1e-9);
        CHECK(rows_unit_norm(a, 1e-9));
    }
}

TEST_CASE("a one-hot manual policy returns the selected encoder slice") {
    const TinyModel tiny = make_tiny_model(ManualWeights{});
    EnsembleModel model = tiny.model;
    std::array<Vec, 4> weights;
    weights[modality_index(Modality::Point3D)] = {1.0};
    weights[modality_index(Modality::Audio)] = {1.0, 0.0};
    weights[modality_index(Modality::Image)] = {1.0, 0.0, 0.0};
    weights[modality_index(Modality::Text)] = {1.0, 0.0, 0.0, 0.0};
    model.policy = manual_policy(weights, model.registry);

    const std::vector<std::size_t> rows = {1, 5, 9};
    // text slot 0 is the anchor: embedding equals the normalized anchor rows
    const Matrix got = embed(model, tiny.world.store, Modality::Text, rows);
    const Matrix expected = l2_normalize_rows(
        gather_rows(tiny.world.store.matrix("anchor", Modality::Text), rows));
    CHECK(max_abs_diff(got, expected) < 1e-12);
}

TEST_CASE("route_weights turns scores into softmax weights") {
    const Router r = constant_router(Modality::Text, 8, 2, {std::log(9.0), 0.0});
    std::vector<Matrix> slices = {random_unit_rows(91, 3, 4), random_unit_rows(92, 3, 4)};
    const RouteEval eval = route_weights(r, slices);
    REQUIRE(eval.scores.rows == 3);
    REQUIRE(eval.scores.cols == 2);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(eval.scores(i, 0) == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(eval.scores(i, 1) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(eval.weights(i, 0) + eval.weights(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
        const double expected =
            std::exp(0.9) / (std::exp(0.9) + std::exp(0.5));
        CHECK(eval.weights(i, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("l_align over indistinguishable batches is six times log batch") {
    const EncoderRegistry reg = tiny_registry();
    RouteConfig cfg;
    cfg.router_hidden_dim = 4;
    const RouterSet routers = make_routers(reg, 6, cfg, true);

    const std::size_t batch = 4;
    std::array<std::vector<Matrix>, 4> slices;
    for (Modality m : kModalities) {
        for (std::size_t e = 0; e < reg.count(m); ++e)
            slices[modality_index(m)].push_back(constant_unit_rows(batch, 6));
    }
    const AlignResult r = l_align(routers, slices, 0.03);
    CHECK(std::abs(r.loss - 6.0 * std::log(4.0)) < 1e-9);
}

TEST_CASE("l_align gradients match finite differences") {
    const EncoderRegistry reg = tiny_registry();
    RouteConfig cfg;
    cfg.router_hidden_dim = 5;
    cfg.seed = 3;
    RouterSet routers = make_routers(reg, 4, cfg);

    Rng rng(93);
    const std::size_t batch = 3;
    std::array<std::vector<Matrix>, 4> slices;
    for (Modality m : kModalities)
        for (std::size_t e = 0; e < reg.count(m); ++e)
            slices[modality_index(m)].push_back(
                l2_normalize_rows(rng.normal_matrix(batch, 4)));

    const AlignResult result = l_align(routers, slices, 0.2);
    for (Modality m : kModalities) {
        Router& router = routers.routers[modality_index(m)];
        auto params = router.net.parameter_views();
        const auto grads = Perceptron::gradient_views(result.router_grads[modality_index(m)]);
        const auto loss = [&](std::span<const double>) {
            return l_align(routers, slices, 0.2, false).loss;
        };
        for (std::size_t p = 0; p < params.size(); ++p) {
            const GradCheckReport report = grad_check(loss, params[p], grads[p]);
            CHECK_MESSAGE(report.pass(1e-4), report.describe());
        }
    }
}

TEST_CASE("l_dec equals the BCE closed form on constant scores") {
    // single text tower with image provenance, scored 0.9 everywhere
    const std::vector<SpaceSpec> spaces = {{"anchor", SpaceFamily::ImageText, 6, true}};
    const EncoderRegistry reg = EncoderRegistry::build(spaces);
    REQUIRE(reg.count(Modality::Text) == 1);

    const std::size_t batch = 3;
    const Router router = constant_router(Modality::Text, 6, 1, {std::log(9.0)});
    const std::vector<Matrix> slices = {random_unit_rows(94, batch, 6)};

    // all texts describe images: every label is 1, BCE is -ln(0.9)
    const std::vector<std::optional<Modality>> image_domains(batch, Modality::Image);
    const Matrix ones = decoupling_labels(reg, image_domains);
    REQUIRE(ones.rows == batch);
    REQUIRE(ones.cols == 1);
    const DecResult hit = l_dec(router, slices, ones);
    CHECK(std::abs(hit.loss - (-std::log(0.9))) < 1e-9);
    // the weighted decoupling objective at lambda 3 is -3 ln(0.9)
    CHECK(std::abs(3.0 * hit.loss - (-3.0 * std::log(0.9))) < 1e-9);

    // all texts describe audio: labels 0 against score 0.9, BCE is -ln(0.1)
    const std::vector<std::optional<Modality>> audio_domains(batch, Modality::Audio);
    const DecResult miss = l_dec(router, slices, decoupling_labels(reg, audio_domains));
    CHECK(std::abs(miss.loss - (-std::log(0.1))) < 1e-9);
}

TEST_CASE("decoupling labels match provenance and reject untagged texts") {
    const EncoderRegistry reg = tiny_registry();
    // text towers: anchor->image, at1->audio, pvt1->point3d, avt1->image
    const std::vector<std::optional<Modality>> domains = {
        Modality::Image, Modality::Audio, Modality::Point3D};
    const Matrix labels = decoupling_labels(reg, domains);
    REQUIRE(labels.rows == 3);
    REQUIRE(labels.cols == 4);
    const Vec expected = {
        1.0, 0.0, 0.0, 1.0, // image text matches anchor and avt1
        0.0, 1.0, 0.0, 0.0, // audio text matches at1
        0.0, 0.0, 1.0, 0.0, // point text matches pvt1
    };
    CHECK(labels.data == expected);

    const std::vector<std::optional<Modality>> untagged = {Modality::Image, std::nullopt};
    CHECK_THROWS_AS(decoupling_labels(reg, untagged), DataError);
}

TEST_CASE("l_dec gradients match finite differences") {
    const EncoderRegistry reg = tiny_registry();
    RouteConfig cfg;
    cfg.router_hidden_dim = 5;
    cfg.seed = 8;
    RouterSet routers = make_routers(reg, 4, cfg);
    Router& text_router = routers.routers[modality_index(Modality::Text)];

    Rng rng(95);
    const std::size_t batch = 4;
    std::vector<Matrix> slices;
    for (std::size_t e = 0; e < reg.count(Modality::Text); ++e)
        slices.push_back(l2_normalize_rows(rng.normal_matrix(batch, 4)));
    const std::vector<std::optional<Modality>> domains = {
        Modality::Image, Modality::Audio, Modality::Point3D, Modality::Audio};
    const Matrix labels = decoupling_labels(reg, domains);

    const DecResult result = l_dec(text_router, slices, labels);
    auto params = text_router.net.parameter_views();
    const auto grads = Perceptron::gradient_views(result.router_grad);
    const auto loss = [&](std::span<const double>) {
        return l_dec(text_router, slices, labels, false).loss;
    };
    for (std::size_t p = 0; p < params.size(); ++p) {
        const GradCheckReport report = grad_check(loss, params[p], grads[p]);
        CHECK_MESSAGE(report.pass(1e-4), report.describe());
    }
}

TEST_CASE("provenance accuracy scores the argmax tower") {
    const std::vector<SpaceSpec> spaces = {
        {"anchor", SpaceFamily::ImageText, 6, true},
        {"at1", SpaceFamily::AudioText, 6, false},
    };
    const EncoderRegistry reg = EncoderRegistry::build(spaces);
    REQUIRE(reg.count(Modality::Text) == 2);
    // constant scores prefer the first tower (image provenance)
    const Router router = constant_router(Modality::Text, 12, 2, {std::log(9.0), 0.0});
    const std::size_t batch = 4;
    std::vector<Matrix> slices = {random_unit_rows(96, batch, 6),
                                  random_unit_rows(97, batch, 6)};
    const std::vector<std::optional<Modality>> domains = {
        Modality::Image, Modality::Audio, Modality::Image, Modality::Point3D};
    // predictions are all "image": two of four domains match
    CHECK(provenance_accuracy(router, reg, slices, domains) == doctest::Approx(0.5));

    const std::vector<std::optional<Modality>> none(batch, std::nullopt);
    CHECK_THROWS_AS(provenance_accuracy(router, reg, slices, none), DataError);
}

TEST_CASE("train_routers is deterministic and needs a routed policy") {
    TinyModel tiny = make_tiny_model(RouterSet{});
    RouteConfig cfg;
    cfg.router_hidden_dim = 8;
    cfg.batch_size = 8;
    cfg.epochs = 2;

    std::vector<PseudoQuadruple> quads(24);
    std::vector<std::optional<Modality>> domains;
    for (std::size_t i = 0; i < quads.size(); ++i) {
        quads[i].origin = Modality::Text;
        for (Modality m : kModalities)
            quads[i].ids[modality_index(m)] =
                std::string(1, modality_prefix(m)) + std::to_string(i);
    }
    for (const Item& t : tiny.world.items[modality_index(Modality::Text)])
        domains.push_back(t.text_domain);

    EnsembleModel a = tiny.model;
    a.policy = make_routers(a.registry, a.anchor_dim, cfg);
    const RouterCurves curves_a = train_routers(a, tiny.world.store, quads, domains, cfg);
    EnsembleModel b = tiny.model;
    b.policy = make_routers(b.registry, b.anchor_dim, cfg);
    const RouterCurves curves_b = train_routers(b, tiny.world.store, quads, domains, cfg);

    CHECK(curves_a.align == curves_b.align);
    CHECK(curves_a.dec == curves_b.dec);
    CHECK(curves_a.total == curves_b.total);
    REQUIRE(curves_a.total.size() == 2);
    const RouterSet& ra = std::get<RouterSet>(a.policy);
    const RouterSet& rb = std::get<RouterSet>(b.policy);
    CHECK(ra.routers[3].net.w1.data == rb.routers[3].net.w1.data);

    // the recorded total combines the two parts with the configured lambda
    for (std::size_t e = 0; e < curves_a.total.size(); ++e)
        CHECK(curves_a.total[e] ==
              doctest::Approx(curves_a.align[e] + cfg.lambda * curves_a.dec[e]).epsilon(1e-9));

    EnsembleModel manual = tiny.model;
    manual.policy = manual_policy(ManualPreset::Mean, manual.registry);
    CHECK_THROWS_AS(train_routers(manual, tiny.world.store, quads, domains, cfg), ConfigError);
    EnsembleModel empty = tiny.model;
    empty.policy = make_routers(empty.registry, empty.anchor_dim, cfg);
    CHECK_THROWS_AS(train_routers(empty, tiny.world.store, {}, domains, cfg), ConfigError);
}

TEST_CASE("disabled loss components stop moving the routers") {
    TinyModel tiny = make_tiny_model(RouterSet{});
    RouteConfig cfg;
    cfg.router_hidden_dim = 8;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.use_align = false;

    std::vector<PseudoQuadruple> quads(24);
    std::vector<std::optional<Modality>> domains;
    for (std::size_t i = 0; i < quads.size(); ++i)
        for (Modality m : kModalities)
            quads[i].ids[modality_index(m)] =
                std::string(1, modality_prefix(m)) + std::to_string(i);
    for (const Item& t : tiny.world.items[modality_index(Modality::Text)])
        domains.push_back(t.text_domain);

    EnsembleModel model = tiny.model;
    model.policy = make_routers(model.registry, model.anchor_dim, cfg);
    const Matrix before = std::get<RouterSet>(model.policy).routers[0].net.w1;
    const RouterCurves curves = train_routers(model, tiny.world.store, quads, domains, cfg);
    // align is still reported, but only the text router (decoupling) learns
    CHECK(curves.align.size() == 2);
    const RouterSet& routers = std::get<RouterSet>(model.policy);
    CHECK(routers.routers[0].net.w1.data == before.data); // point router untouched
}

TEST_CASE("routers round-trip through checkpoints") {
    const EncoderRegistry reg = tiny_registry();
    RouteConfig cfg;
    cfg.router_hidden_dim = 8;
    cfg.seed = 12;
    const RouterSet routers = make_routers(reg, 6, cfg);

    const auto dir = scratch_dir("route-checkpoint");
    save_routers(routers, reg, cfg, dir.string());
    const RouterSet loaded = load_routers(dir.string(), reg);
    for (Modality m : kModalities) {
        const Perceptron& a = routers.routers[modality_index(m)].net;
        const Perceptron& b = loaded.routers[modality_index(m)].net;
        REQUIRE(a.w1.size() == b.w1.size());
        CHECK(max_abs_diff(a.w1, b.w1) < 1e-6);
        CHECK(max_abs_diff(a.w2, b.w2) < 1e-6);
    }

    // loading against a different registry shape is rejected
    const std::vector<SpaceSpec> other = {{"anchor", SpaceFamily::ImageText, 6, true}};
    CHECK_THROWS_AS(load_routers(dir.string(), EncoderRegistry::build(other)), ConfigError);
}

} // TEST_SUITE
