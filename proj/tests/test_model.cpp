#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmfl/fusion.hpp"
#include "mmfl/model.hpp"
#include "mmfl/representation.hpp"
#include "mmfl/rng.hpp"
#include "mmfl/train.hpp"

using namespace mmfl;

namespace {

Eigen::MatrixXd randm(Rng& rng, Eigen::Index r, Eigen::Index c) {
    return Eigen::MatrixXd::NullaryExpr(r, c, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
}

ModelConfig toy_config(Method method) {
    ModelConfig cfg;
    cfg.feature_lens = {5, 3};
    cfg.n_classes = 3;
    cfg.embed_dim = 4;
    cfg.d_p = 4;
    cfg.tau = 4;
    cfg.kappa = 2;
    cfg.method = method;
    return cfg;
}

Batch toy_batch(const ModelConfig& cfg, int B, uint64_t seed,
                const std::vector<std::vector<uint8_t>>& avail = {}) {
    Rng rng(seed);
    Batch b;
    for (int f : cfg.feature_lens) b.features.push_back(randm(rng, f, B));
    for (int d = 0; d < B; ++d) {
        b.labels.push_back(static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.n_classes))));
        b.available.push_back(avail.empty() ? std::vector<uint8_t>(cfg.feature_lens.size(), 1)
                                            : avail[static_cast<size_t>(d)]);
    }
    // zero masked slots like apply_mask would
    for (int d = 0; d < B; ++d)
        for (size_t m = 0; m < b.features.size(); ++m)
            if (!b.available[static_cast<size_t>(d)][m]) b.features[m].col(d).setZero();
    return b;
}

} // namespace

TEST_CASE("impute oracle against brute-force means") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        int M = 2 + static_cast<int>(rng.uniform_int(5));
        int C = 1 + static_cast<int>(rng.uniform_int(6));
        std::vector<uint8_t> avail(static_cast<size_t>(M), 0);
        int n_avail = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(M)));
        for (int i = 0; i < n_avail; ++i) avail[static_cast<size_t>(i)] = 1;
        rng.shuffle(avail);

        ad::Tape tape;
        std::vector<ad::Var> feats;
        std::vector<Eigen::MatrixXd> raw;
        for (int i = 0; i < M; ++i) {
            raw.push_back(randm(rng, C, 1));
            feats.push_back(tape.leaf(raw.back()));
        }
        auto out = impute(tape, feats, avail);

        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(C, 1);
        int k = 0;
        for (int i = 0; i < M; ++i)
            if (avail[static_cast<size_t>(i)]) { mean += raw[static_cast<size_t>(i)]; ++k; }
        mean /= k;
        for (int i = 0; i < M; ++i) {
            const Eigen::MatrixXd& want = avail[static_cast<size_t>(i)] ? raw[static_cast<size_t>(i)] : mean;
            CHECK((tape.val(out[static_cast<size_t>(i)]) - want).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("impute with nothing missing is the identity") {
    ad::Tape tape;
    Rng rng(2);
    std::vector<ad::Var> feats = {tape.leaf(randm(rng, 3, 1)), tape.leaf(randm(rng, 3, 1))};
    auto out = impute(tape, feats, {1, 1});
    CHECK(out[0].i == feats[0].i);
    CHECK(out[1].i == feats[1].i);
}

TEST_CASE("impute rejects the all-missing instance") {
    ad::Tape tape;
    std::vector<ad::Var> feats = {tape.leaf(Eigen::MatrixXd::Zero(2, 1)),
                                  tape.leaf(Eigen::MatrixXd::Zero(2, 1))};
    CHECK_THROWS_AS(impute(tape, feats, {0, 0}), AllMissing);
}

TEST_CASE("contrastive_alignment_loss equals 4 log 8 on equal features") {
    ad::Tape tape;
    Eigen::MatrixXd stacked = Eigen::MatrixXd::Ones(3, 4);  // 2 instances x 2 modalities
    ad::Var l = contrastive_alignment_loss(tape, tape.leaf(stacked), {0, 0, 1, 1});
    CHECK(tape.sval(l) == doctest::Approx(4.0 * std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("contrastive_alignment_loss permutation invariance") {
    Rng rng(3);
    Eigen::MatrixXd stacked = randm(rng, 4, 6);
    std::vector<int> ids = {0, 0, 1, 1, 2, 2};
    ad::Tape t1;
    double a = t1.sval(contrastive_alignment_loss(t1, t1.leaf(stacked), ids));
    // relabel instances
    std::vector<int> relabeled = {2, 2, 0, 0, 1, 1};
    ad::Tape t2;
    double b = t2.sval(contrastive_alignment_loss(t2, t2.leaf(stacked), relabeled));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("contrastive_alignment_loss needs two distinct instances") {
    ad::Tape tape;
    Eigen::MatrixXd stacked = Eigen::MatrixXd::Ones(3, 2);
    CHECK_THROWS_AS(contrastive_alignment_loss(tape, tape.leaf(stacked), {0, 0}),
                    InsufficientBatch);
}

TEST_CASE("alignment loss decreases under gradient descent") {
    // two instances, two modalities, same-instance features start anti-aligned
    Eigen::MatrixXd stacked(2, 4);
    stacked << 1, -1, 0.3, -0.3,
               0.1, -0.1, 1, -1;
    std::vector<int> ids = {0, 0, 1, 1};
    double prev = 1e18;
    for (int step = 0; step < 20; ++step) {
        ad::Tape tape;
        ad::Var leaf = tape.leaf(stacked);
        ad::Var l = contrastive_alignment_loss(tape, leaf, ids);
        double cur = tape.sval(l);
        if (step > 2) CHECK(cur < prev);
        prev = cur;
        tape.backward(l);
        stacked -= 0.1 * tape.grad(leaf);
    }
}

TEST_CASE("fuse equals softmax-weighted mean oracle") {
    Rng rng(4);
    ad::Tape tape;
    Eigen::MatrixXd w = randm(rng, 6, 3);
    Eigen::MatrixXd what_raw = randm(rng, 2, 3);
    for (int j = 0; j < 3; ++j) what_raw.col(j).normalize();
    ad::Var fused = fuse(tape, tape.leaf(w), tape.leaf(what_raw), 1.0);
    Eigen::MatrixXd got = tape.val(fused);
    REQUIRE(got.cols() == 3);

    for (int i = 0; i < 3; ++i) {
        Eigen::Vector3d logits;
        for (int j = 0; j < 3; ++j) logits[j] = what_raw.col(i).dot(what_raw.col(j));
        Eigen::Vector3d att = (logits.array() - logits.maxCoeff()).exp();
        att /= att.sum();
        Eigen::VectorXd want = Eigen::VectorXd::Zero(6);
        for (int j = 0; j < 3; ++j) want += att[j] * w.col(j);
        CHECK((got.col(i) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("fuse with identical projections is the plain mean") {
    Rng rng(5);
    ad::Tape tape;
    Eigen::MatrixXd w = randm(rng, 4, 3);
    Eigen::MatrixXd what = Eigen::MatrixXd::Ones(2, 3) / std::sqrt(2.0);
    Eigen::MatrixXd got = tape.val(fuse(tape, tape.leaf(w), tape.leaf(what)));
    Eigen::VectorXd mean = w.rowwise().mean();
    for (int i = 0; i < 3; ++i) CHECK((got.col(i) - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gate_combine blends with sigmoid gate") {
    Rng rng(6);
    ad::Tape tape;
    Eigen::MatrixXd w = randm(rng, 3, 2), c = randm(rng, 3, 2);
    Eigen::MatrixXd gw = randm(rng, 6, 1), gb = randm(rng, 1, 1);
    auto res = gate_combine(tape, tape.leaf(w), tape.leaf(c), tape.leaf(gw), tape.leaf(gb));
    for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd cat(6);
        cat << w.col(j), c.col(j);
        double alpha = 1.0 / (1.0 + std::exp(-(gw.col(0).dot(cat) + gb(0, 0))));
        CHECK(tape.val(res.alpha)(0, j) == doctest::Approx(alpha).epsilon(1e-12));
        Eigen::VectorXd want = alpha * c.col(j) + (1 - alpha) * w.col(j);
        CHECK((tape.val(res.combined).col(j) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("total_loss arithmetic and validation") {
    ad::Tape t;
    ad::Var l = total_loss(t, t.scalar(1.0), t.scalar(2.0), t.scalar(3.0), t.scalar(4.0),
                           0.1, 0.1);
    CHECK(t.sval(l) == doctest::Approx(1.1).epsilon(1e-12));
    CHECK_THROWS_AS(total_loss(t, t.scalar(1.0), t.scalar(0.0), t.scalar(0.0), t.scalar(0.0),
                               -0.1, 0.0), ValidationError);
}

TEST_CASE("model init is deterministic and names are stable") {
    ClientModel a, b;
    a.cfg = toy_config(Method::pepsy);
    b.cfg = a.cfg;
    a.init(42);
    b.init(42);
    REQUIRE(a.params.size() == b.params.size());
    for (const auto& [name, m] : a.params) CHECK(m == b.params.at(name));
    CHECK(a.profile.controls == b.profile.controls);
    CHECK(a.params.count("wmod") == 1);
    CHECK(a.params.count("query.w") == 1);
    CHECK(a.params.count("recon.w") == 1);
    CHECK(a.params.count("gate.w") == 1);
    CHECK(a.params.count("head.w") == 1);
    CHECK(a.buffers.count("enc0.running_mean") == 1);
}

TEST_CASE("method variants drop the right components") {
    ClientModel np, nr, plain;
    np.cfg = toy_config(Method::pepsy_np);
    nr.cfg = toy_config(Method::pepsy_nr);
    plain.cfg = toy_config(Method::fedavg_plain);
    np.init(1); nr.init(1); plain.init(1);
    CHECK(np.params.count("query.w") == 0);
    CHECK(np.profile.tau() == 0);
    CHECK(nr.params.count("recon.w") == 0);
    CHECK(nr.params.count("gate.w") == 0);
    CHECK(nr.params.count("query.w") == 1);
    CHECK(plain.params.count("wmod") == 0);
    CHECK(plain.params.count("head.w") == 1);
}

TEST_CASE("forward emits finite losses and logits for every method") {
    for (Method m : {Method::pepsy, Method::pepsy_np, Method::pepsy_nr, Method::fedavg_plain,
                     Method::fedprox}) {
        ClientModel model;
        model.cfg = toy_config(m);
        model.init(7);
        Batch batch = toy_batch(model.cfg, 4, 9,
                                {{1, 1}, {1, 0}, {0, 1}, {1, 1}});
        ad::Tape tape;
        ForwardOptions opts;
        opts.training = true;
        opts.lambda = 0.1;
        opts.eta = 0.1;
        auto res = forward(tape, model, batch, opts);
        CHECK(std::isfinite(tape.sval(res.loss)));
        CHECK(res.logits.rows() == 3);
        CHECK(res.logits.cols() == 4);
        CHECK(res.logits.allFinite());
        bool plain = m == Method::fedavg_plain || m == Method::fedprox;
        if (!plain) CHECK(res.contrastive_active);
        if (m == Method::pepsy_np || plain) CHECK(tape.sval(res.relevance) == 0.0);
        if (m == Method::pepsy_nr || plain) CHECK(tape.sval(res.l_rc) == 0.0);
    }
}

TEST_CASE("end-to-end gradient vs finite differences, selections frozen") {
    // 2 instances, 2 modalities, C=4, tau=4, kappa=2, one missing slot
    ClientModel model;
    model.cfg = toy_config(Method::pepsy);
    // one modality sees a single available column, so its batch variance is 0;
    // a larger eps keeps the normalization well-conditioned for central FD
    model.cfg.bn_eps = 1e-2;
    model.init(11);
    // move the shift parameters off zero: with zero batch variance the
    // normalized column is exactly zero, and an all-zero encoder output sits
    // at the non-differentiable point of the column l2-normalization
    {
        Rng rng(17);
        for (auto& [name, m] : model.params)
            if (name.size() > 5 && name.substr(name.size() - 5) == ".beta")
                for (Eigen::Index r = 0; r < m.rows(); ++r)
                    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = 0.3 * rng.normal();
    }
    Batch batch = toy_batch(model.cfg, 2, 13, {{1, 1}, {1, 0}});

    ForwardOptions opts;
    opts.training = true;
    opts.lambda = 0.1;
    opts.eta = 0.1;

    // freeze the selections made on the unperturbed model
    Selections frozen;
    {
        ad::Tape tape;
        frozen = forward(tape, model, batch, opts).selections;
    }
    opts.frozen_selections = &frozen;

    ad::Tape tape;
    auto res = forward(tape, model, batch, opts);
    tape.backward(res.loss);

    const double eps = 1e-5;
    auto loss_at = [&](ClientModel& m2) {
        ad::Tape t2;
        return t2.sval(forward(t2, m2, batch, opts).loss);
    };
    for (auto& [name, value] : model.params) {
        REQUIRE(tape.has_grad(res.param_vars.at(name)));
        const Eigen::MatrixXd& g = tape.grad(res.param_vars.at(name));
        double worst = 0;
        for (Eigen::Index r = 0; r < value.rows(); ++r) {
            for (Eigen::Index c = 0; c < value.cols(); ++c) {
                ClientModel m2 = model;
                m2.params[name](r, c) += eps;
                double fp = loss_at(m2);
                m2.params[name](r, c) -= 2 * eps;
                double fm = loss_at(m2);
                double fd = (fp - fm) / (2 * eps);
                double denom = std::max({1.0, std::abs(fd), std::abs(g(r, c))});
                worst = std::max(worst, std::abs(g(r, c) - fd) / denom);
            }
        }
        INFO("parameter group ", name);
        CHECK(worst <= 1e-3);
    }
    // profile controls
    {
        REQUIRE(tape.has_grad(res.profile_var));
        const Eigen::MatrixXd& g = tape.grad(res.profile_var);
        double worst = 0;
        for (Eigen::Index r = 0; r < model.profile.controls.rows(); ++r) {
            for (Eigen::Index c = 0; c < model.profile.controls.cols(); ++c) {
                ClientModel m2 = model;
                m2.profile.controls(r, c) += eps;
                double fp = loss_at(m2);
                m2.profile.controls(r, c) -= 2 * eps;
                double fm = loss_at(m2);
                double fd = (fp - fm) / (2 * eps);
                double denom = std::max({1.0, std::abs(fd), std::abs(g(r, c))});
                worst = std::max(worst, std::abs(g(r, c) - fd) / denom);
            }
        }
        INFO("profile controls");
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("eval forward ignores batch statistics updates") {
    ClientModel model;
    model.cfg = toy_config(Method::pepsy);
    model.init(21);
    Batch batch = toy_batch(model.cfg, 4, 23);
    ParamMap buffers_before = model.buffers;
    predict_logits(model, batch);
    for (const auto& [name, m] : buffers_before) CHECK(model.buffers.at(name) == m);
}

TEST_CASE("training mode updates running statistics") {
    ClientModel model;
    model.cfg = toy_config(Method::pepsy);
    model.init(21);
    Batch batch = toy_batch(model.cfg, 4, 23);
    ParamMap before = model.buffers;
    ad::Tape tape;
    ForwardOptions opts;
    opts.training = true;
    forward(tape, model, batch, opts);
    CHECK(model.buffers.at("enc0.running_mean") != before.at("enc0.running_mean"));
}

TEST_CASE("local_train with lr=0 keeps parameters bit-identical") {
    ClientModel model;
    model.cfg = toy_config(Method::pepsy);
    model.init(31);
    auto ds = generate_synthetic(40, 2, 5, 3, 1.0, 33);
    ds.features[1].conservativeResize(3, Eigen::NoChange);  // match toy feature_lens
    ParamMap before = model.params;
    Eigen::MatrixXd controls_before = model.profile.controls;

    TrainOptions opts;
    opts.epochs = 2;
    opts.batch_size = 8;
    opts.learning_rate = 0.0;
    opts.seed = 5;
    local_train(model, ds, opts);
    for (const auto& [name, m] : before) CHECK(model.params.at(name) == m);
    CHECK(model.profile.controls == controls_before);
}

TEST_CASE("local_train reduces the training loss") {
    ClientModel model;
    model.cfg = toy_config(Method::pepsy);
    model.init(41);
    auto ds = generate_synthetic(60, 2, 5, 3, 1.5, 43);
    ds.features[1].conservativeResize(3, Eigen::NoChange);

    TrainOptions opts;
    opts.epochs = 6;
    opts.batch_size = 16;
    opts.learning_rate = 0.05;
    opts.lambda = 0.0;
    opts.eta = 0.0;
    opts.seed = 45;
    auto report = local_train(model, ds, opts);
    REQUIRE(report.per_epoch.size() == 6);
    CHECK(report.per_epoch.back().l_task < report.per_epoch.front().l_task);
}

TEST_CASE("local_train is deterministic given the seed") {
    for (int run = 0; run < 2; ++run) {
        static ParamMap first;
        ClientModel model;
        model.cfg = toy_config(Method::pepsy);
        model.init(51);
        auto ds = generate_synthetic(40, 2, 5, 3, 1.0, 53);
        ds.features[1].conservativeResize(3, Eigen::NoChange);
        TrainOptions opts;
        opts.epochs = 2;
        opts.batch_size = 8;
        opts.seed = 55;
        local_train(model, ds, opts);
        if (run == 0) first = model.params;
        else for (const auto& [name, m] : first) CHECK(model.params.at(name) == m);
    }
}

TEST_CASE("fedprox proximal pull moves parameters toward the anchor") {
    ClientModel a, b;
    a.cfg = toy_config(Method::fedprox);
    b.cfg = a.cfg;
    a.init(61);
    b.init(61);
    auto ds = generate_synthetic(40, 2, 5, 3, 1.0, 63);
    ds.features[1].conservativeResize(3, Eigen::NoChange);

    ParamMap anchor = a.params;  // prox anchor = the init point
    TrainOptions opts;
    opts.epochs = 3;
    opts.batch_size = 8;
    opts.learning_rate = 0.05;
    opts.seed = 65;
    local_train(a, ds, opts);  // mu = 0

    // keep lr * mu well below 1 so the proximal step contracts toward the anchor
    opts.fedprox_mu = 5.0;
    opts.global_params = &anchor;
    local_train(b, ds, opts);

    double drift_plain = 0, drift_prox = 0;
    for (const auto& [name, m] : anchor) {
        drift_plain += (a.params.at(name) - m).squaredNorm();
        drift_prox += (b.params.at(name) - m).squaredNorm();
    }
    CHECK(drift_prox < drift_plain);
}

TEST_CASE("adopt_global_profile keeps globals and pads to tau") {
    ClientModel model;
    model.cfg = toy_config(Method::pepsy);  // tau = 4
    model.init(71);
    DataMissingProfile small = make_profile(2, 4, 73);
    model.adopt_global_profile(small, 75);
    CHECK(model.profile.tau() == 4);
    CHECK(model.profile.controls.leftCols(2) == small.controls);

    DataMissingProfile large = make_profile(7, 4, 77);
    model.adopt_global_profile(large, 79);
    CHECK(model.profile.tau() == 7);
    CHECK(model.profile.controls == large.controls);
}
