#include "doctest.h"

#include <cmath>
#include <map>

#include "spacebind/binding.hpp"
#include "spacebind/errors.hpp"
#include "spacebind/gradcheck.hpp"
#include "spacebind/pairing.hpp"
#include "spacebind/world.hpp"

#include "support.hpp"

using namespace spacebind;
using namespace testsupport;

namespace {

std::vector<PseudoQuadruple> identity_quads(std::size_t n) {
    std::vector<PseudoQuadruple> quads(n);
    for (std::size_t i = 0; i < n; ++i) {
        quads[i].origin = Modality::Audio;
        for (Modality m : kModalities)
            quads[i].ids[modality_index(m)] =
                std::string(1, modality_prefix(m)) + std::to_string(i);
    }
    return quads;
}

} // namespace

TEST_SUITE("binding") {

TEST_CASE("info_nce is zero for a single matched pair") {
    const Matrix x = random_unit_rows(61, 1, 5);
    const InfoNceResult r = info_nce(x, x, 0.03);
    CHECK(std::abs(r.loss) < 1e-12);
}

TEST_CASE("info_nce on an indistinguishable batch equals log batch size") {
    for (std::size_t n : {2, 5, 17}) {
        const Matrix x = constant_unit_rows(n, 4);
        const InfoNceResult r = info_nce(x, x, 0.03);
        CHECK(std::abs(r.loss - std::log(static_cast<double>(n))) < 1e-12);
    }
}

TEST_CASE("info_nce on orthonormal pairs matches the closed form") {
    Matrix x(2, 3);
    x(0, 0) = 1.0;
    x(1, 1) = 1.0;
    // every row and column reduces to a two-way softmax with margin 1/tau
    for (double tau : {1.0, 0.5, 0.03}) {
        const InfoNceResult r = info_nce(x, x, tau);
        CHECK(std::abs(r.loss - std::log1p(std::exp(-1.0 / tau))) < 1e-12);
    }
}

TEST_CASE("info_nce is symmetric in its arguments") {
    const Matrix x = random_unit_rows(62, 6, 4);
    const Matrix y = random_unit_rows(63, 6, 4);
    const InfoNceResult a = info_nce(x, y, 0.07);
    const InfoNceResult b = info_nce(y, x, 0.07);
    CHECK(std::abs(a.loss - b.loss) < 1e-12);
    CHECK(max_abs_diff(a.grad_x, b.grad_y) < 1e-12);
    CHECK(max_abs_diff(a.grad_y, b.grad_x) < 1e-12);
}

TEST_CASE("info_nce is invariant under a shared orthogonal map") {
    const Matrix x = random_unit_rows(64, 5, 4);
    const Matrix y = random_unit_rows(65, 5, 4);
    // Householder reflection: orthogonal, preserves all dot products
    const Matrix v = random_unit_rows(66, 1, 4);
    Matrix h(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        h(i, i) = 1.0;
        for (std::size_t j = 0; j < 4; ++j) h(i, j) -= 2.0 * v(0, i) * v(0, j);
    }
    const InfoNceResult a = info_nce(x, y, 0.05);
    const InfoNceResult b = info_nce(matmul(x, h), matmul(y, h), 0.05);
    CHECK(std::abs(a.loss - b.loss) < 1e-9);
}

TEST_CASE("info_nce validates its inputs") {
    const Matrix x = random_unit_rows(67, 3, 4);
    CHECK_THROWS_AS(info_nce(x, random_unit_rows(68, 4, 4), 0.03), ShapeError);
    CHECK_THROWS_AS(info_nce(x, scale(x, 2.0), 0.03), DataError); // not unit rows
    CHECK_THROWS_AS(info_nce(Matrix(0, 4), Matrix(0, 4), 0.03), DataError);
    CHECK_THROWS_AS(info_nce(x, x, 0.0), ConfigError);
}

TEST_CASE("info_nce gradients match finite differences through normalization") {
    Rng rng(69);
    Matrix raw_x = rng.normal_matrix(4, 5);
    const Matrix y = random_unit_rows(70, 4, 5);
    const double tau = 0.08;

    const InfoNceResult at_point = info_nce(l2_normalize_rows(raw_x), y, tau);
    const Matrix analytic = l2_normalize_rows_backward(raw_x, at_point.grad_x);
    const auto loss = [&](std::span<const double> params) {
        Matrix probe(4, 5);
        std::copy(params.begin(), params.end(), probe.data.begin());
        return info_nce(l2_normalize_rows(probe), y, tau, false).loss;
    };
    const GradCheckReport report = grad_check(loss, std::span<double>(raw_x.data),
                                              std::span<const double>(analytic.data));
    CHECK_MESSAGE(report.pass(1e-5), report.describe());
}

TEST_CASE("project averages the stack and returns unit rows") {
    SpaceSpec source{"at1", SpaceFamily::AudioText, 6, false};
    BindConfig cfg;
    cfg.projector_hidden_dim = 8;
    cfg.projector_count = 2;
    BoundSpace bound = make_bound_space(source, 5, cfg);
    // two identical projectors must match the single-projector output
    bound.projectors[1] = bound.projectors[0];
    BoundSpace single = bound;
    single.projectors.pop_back();

    Rng rng(71);
    const Matrix x = rng.normal_matrix(7, 6);
    const Matrix a = project(bound, x);
    const Matrix b = project(single, x);
    CHECK(rows_unit_norm(a, 1e-9));
    CHECK(max_abs_diff(a, b) < 1e-12);
    CHECK_THROWS_AS(project(bound, rng.normal_matrix(3, 4)), ShapeError);
}

TEST_CASE("make_bound_space is keyed on the space name") {
    SpaceSpec source{"at1", SpaceFamily::AudioText, 6, false};
    BindConfig cfg;
    cfg.projector_hidden_dim = 8;
    const BoundSpace a = make_bound_space(source, 5, cfg);
    const BoundSpace b = make_bound_space(source, 5, cfg);
    CHECK(a.projectors[0].w1.data == b.projectors[0].w1.data);
    CHECK(a.projectors[0].w2.data == b.projectors[0].w2.data);

    SpaceSpec renamed = source;
    renamed.name = "at2";
    const BoundSpace c = make_bound_space(renamed, 5, cfg);
    CHECK(a.projectors[0].w1.data != c.projectors[0].w1.data);

    CHECK(a.projectors[0].hidden_dim == 8);
    BindConfig defaulted;
    const BoundSpace d = make_bound_space(source, 5, defaulted);
    CHECK(d.projectors[0].hidden_dim == 4 * 5);

    SpaceSpec anchor{"anchor", SpaceFamily::ImageText, 5, true};
    CHECK_THROWS_AS(make_bound_space(anchor, 5, cfg), ConfigError);
}

TEST_CASE("bind_loss sums one term per source-anchor modality pair") {
    BindConfig cfg;
    cfg.projector_hidden_dim = 8;
    const double tau = 0.2;

    Rng rng(72);
    const std::size_t batch = 5;
    const std::map<Modality, Matrix> anchors = {
        {Modality::Image, random_unit_rows(73, batch, 5)},
        {Modality::Text, random_unit_rows(74, batch, 5)},
    };

    // two-modality family: 2 source x 2 anchor = 4 terms
    SpaceSpec at{"at1", SpaceFamily::AudioText, 6, false};
    const BoundSpace bound_at = make_bound_space(at, 5, cfg);
    std::map<Modality, Matrix> source_at = {
        {Modality::Audio, rng.normal_matrix(batch, 6)},
        {Modality::Text, rng.normal_matrix(batch, 6)},
    };
    double manual = 0.0;
    for (const auto& [sm, raw] : source_at) {
        const Matrix projected = project(bound_at, raw);
        for (const auto& [am, anchor_rows] : anchors)
            manual += info_nce(projected, anchor_rows, tau, false).loss;
    }
    const BindLossResult at_result = bind_loss(bound_at, source_at, anchors, tau);
    CHECK(at_result.loss == doctest::Approx(manual).epsilon(1e-12));
    REQUIRE(at_result.projector_grads.size() == 1);

    // three-modality family: 3 x 2 = 6 terms
    SpaceSpec avt{"avt1", SpaceFamily::AudioImageText, 6, false};
    const BoundSpace bound_avt = make_bound_space(avt, 5, cfg);
    std::map<Modality, Matrix> source_avt = source_at;
    source_avt[Modality::Image] = rng.normal_matrix(batch, 6);
    manual = 0.0;
    for (const auto& [sm, raw] : source_avt) {
        const Matrix projected = project(bound_avt, raw);
        for (const auto& [am, anchor_rows] : anchors)
            manual += info_nce(projected, anchor_rows, tau, false).loss;
    }
    const BindLossResult avt_result = bind_loss(bound_avt, source_avt, anchors, tau);
    CHECK(avt_result.loss == doctest::Approx(manual).epsilon(1e-12));

    // missing or extra batches are configuration errors
    std::map<Modality, Matrix> missing = {{Modality::Audio, source_at.at(Modality::Audio)}};
    CHECK_THROWS_AS(bind_loss(bound_at, missing, anchors, tau), ConfigError);
    std::map<Modality, Matrix> extra = source_at;
    extra[Modality::Point3D] = rng.normal_matrix(batch, 6);
    CHECK_THROWS_AS(bind_loss(bound_at, extra, anchors, tau), ConfigError);
    std::map<Modality, Matrix> anchor_missing = {{Modality::Image, anchors.at(Modality::Image)}};
    CHECK_THROWS_AS(bind_loss(bound_at, source_at, anchor_missing, tau), ConfigError);
}

TEST_CASE("bind_loss gradients match finite differences") {
    BindConfig cfg;
    cfg.projector_hidden_dim = 6;
    SpaceSpec at{"at1", SpaceFamily::AudioText, 4, false};
    BoundSpace bound = make_bound_space(at, 4, cfg);

    Rng rng(75);
    const std::size_t batch = 4;
    const std::map<Modality, Matrix> sources = {
        {Modality::Audio, rng.normal_matrix(batch, 4)},
        {Modality::Text, rng.normal_matrix(batch, 4)},
    };
    const std::map<Modality, Matrix> anchors = {
        {Modality::Image, random_unit_rows(76, batch, 4)},
        {Modality::Text, random_unit_rows(77, batch, 4)},
    };
    const double tau = 0.15;

    const BindLossResult result = bind_loss(bound, sources, anchors, tau);
    auto params = bound.projectors[0].parameter_views();
    const auto grads = Perceptron::gradient_views(result.projector_grads[0]);
    const auto loss = [&](std::span<const double>) {
        return bind_loss(bound, sources, anchors, tau, false).loss;
    };
    for (std::size_t p = 0; p < params.size(); ++p) {
        const GradCheckReport report = grad_check(loss, params[p], grads[p]);
        CHECK_MESSAGE(report.pass(1e-4), report.describe());
    }
}

TEST_CASE("train_projector is deterministic and reduces the loss") {
    WorldConfig wcfg = tiny_world(80, 32);
    const World world = generate_world(wcfg);
    const auto quads = identity_quads(32);

    BindConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 3;
    cfg.learning_rate = 1e-2;
    cfg.projector_hidden_dim = 16;

    const SpaceSpec& at1 = wcfg.spaces[1];
    BoundSpace a = make_bound_space(at1, 12, cfg);
    const std::vector<double> curve_a = train_projector(a, quads, world.store, cfg);
    BoundSpace b = make_bound_space(at1, 12, cfg);
    const std::vector<double> curve_b = train_projector(b, quads, world.store, cfg);

    CHECK(curve_a == curve_b);
    CHECK(a.projectors[0].w1.data == b.projectors[0].w1.data);
    REQUIRE(curve_a.size() == 3);
    CHECK(curve_a.back() < curve_a.front());

    BoundSpace c = make_bound_space(at1, 12, cfg);
    CHECK_THROWS_AS(train_projector(c, {}, world.store, cfg), ConfigError);
}

TEST_CASE("bound spaces round-trip through checkpoints") {
    BindConfig cfg;
    cfg.projector_hidden_dim = 8;
    cfg.projector_count = 2;
    SpaceSpec source{"avt1", SpaceFamily::AudioImageText, 6, false};
    BoundSpace bound = make_bound_space(source, 5, cfg);

    const auto dir = scratch_dir("bind-checkpoint");
    save_bound_space(bound, cfg, dir.string());
    const BoundSpace loaded = load_bound_space(dir.string(), "avt1");

    CHECK(loaded.source.name == "avt1");
    CHECK(loaded.source.family == SpaceFamily::AudioImageText);
    CHECK(loaded.anchor_dim == 5);
    REQUIRE(loaded.projectors.size() == 2);

    Rng rng(81);
    const Matrix x = rng.normal_matrix(4, 6);
    // parameters pass through f32 blobs; projections agree to float precision
    CHECK(max_abs_diff(project(bound, x), project(loaded, x)) < 1e-6);

    CHECK_THROWS_AS(load_bound_space(dir.string(), "missing"), IoError);
}

} // TEST_SUITE
