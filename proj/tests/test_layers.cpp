#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "plangen/grad_check.hpp"
#include "plangen/layers.hpp"
#include "plangen/rng.hpp"

using namespace plangen;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;
using nn::Activation;

TEST_CASE("embed_lookup: identity table and round trip") {
    Rng rng(1);
    nn::Embedding emb("emb", 4, 4, rng);
    emb.table.value = Matrix::Identity(4, 4);
    Tape t;
    Var e2 = emb.lookup(t, 2);
    Matrix expect = Matrix::Zero(1, 4);
    expect(0, 2) = 1.0;
    CHECK(e2.value() == expect);

    nn::Embedding emb2("emb2", 5, 3, rng);
    Tape t2;
    for (int i = 0; i < 5; ++i) CHECK(emb2.lookup(t2, i).value() == emb2.table.value.row(i));
}

TEST_CASE("embed_lookup: out-of-range id and one-hot gradient") {
    Rng rng(2);
    nn::Embedding emb("emb", 3, 2, rng);
    Tape t;
    CHECK_THROWS_AS(emb.lookup(t, 3), VocabError);
    CHECK_THROWS_AS(emb.lookup(t, -1), VocabError);

    emb.table.zero_grad();
    Var row = emb.lookup(t, 1);
    t.backward(ad::sum(row));
    Matrix g = emb.table.grad;
    CHECK(g.row(1).sum() == 2.0);
    CHECK(g.row(0).cwiseAbs().sum() == 0.0);
    CHECK(g.row(2).cwiseAbs().sum() == 0.0);
}

TEST_CASE("gru_step analytic zero-weight cases") {
    Rng rng(3);
    nn::GruCell cell("gru", 3, 4, false, rng);
    for (Parameter* p : cell.params()) p->value.setZero();

    Tape t;
    Var x = t.constant(Matrix::Random(1, 3));
    SUBCASE("h_prev zero gives zero") {
        Var h = cell.step(t, x, t.zeros(1, 4));
        CHECK(h.value().cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("h_prev v gives v/2") {
        Matrix v(1, 4);
        v << 1, -2, 3, 0.5;
        Var h = cell.step(t, x, t.constant(v));
        CHECK((h.value() - 0.5 * v).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("gru_step shape mismatch") {
    Rng rng(4);
    nn::GruCell cell("gru", 3, 4, false, rng);
    Tape t;
    CHECK_THROWS_AS(cell.step(t, t.zeros(1, 5), t.zeros(1, 4)), DimensionError);
}

TEST_CASE("gru_step gradient matches finite differences") {
    Rng rng(5);
    nn::GruCell cell("gru", 3, 4, false, rng);
    Matrix x0 = Matrix::Random(1, 3), h0 = Matrix::Random(1, 4);
    auto f = [&](Tape& t) {
        Var h = cell.step(t, t.constant(x0), t.constant(h0));
        return ad::sum(ad::mul(h, h));
    };
    auto report = ad::grad_check(f, cell.params(), 1e-5, 1e-4);
    CHECK(report.pass);
}

TEST_CASE("gru_step with layer norm: gradient and shapes") {
    Rng rng(6);
    nn::GruCell cell("gruln", 3, 4, true, rng);
    Matrix x0 = Matrix::Random(1, 3), h0 = Matrix::Random(1, 4);
    auto f = [&](Tape& t) {
        Var h = cell.step(t, t.constant(x0), t.constant(h0));
        return ad::sum(ad::mul(h, h));
    };
    auto report = ad::grad_check(f, cell.params(), 1e-5, 1e-4);
    CHECK(report.pass);
    CHECK(cell.params().size() == 15);
}

TEST_CASE("gru output bounded by max(|h_prev|, 1)") {
    Rng rng(7);
    nn::GruCell cell("gru", 2, 3, false, rng);
    for (int trial = 0; trial < 50; ++trial) {
        Tape t;
        Matrix x = 3.0 * Matrix::Random(1, 2);
        Matrix h0 = 2.0 * Matrix::Random(1, 3);
        Var h = cell.step(t, t.constant(x), t.constant(h0));
        for (int j = 0; j < 3; ++j) {
            double bound = std::max(std::abs(h0(0, j)), 1.0) + 1e-12;
            CHECK(std::abs(h.value()(0, j)) <= bound);
        }
    }
}

TEST_CASE("encode_bidirectional base case and symmetry") {
    Rng rng(8);
    nn::GruCell fwd("f", 3, 4, false, rng), bwd("b", 3, 4, false, rng);

    SUBCASE("length-1 source") {
        Tape t;
        Matrix x0 = Matrix::Random(1, 3);
        Var x = t.constant(x0);
        auto ann = nn::encode_bidirectional(t, fwd, bwd, {x});
        CHECK(ann.src_len == 1);
        Var f1 = fwd.step(t, x, t.zeros(1, 4));
        Var b1 = bwd.step(t, x, t.zeros(1, 4));
        Matrix expect(1, 8);
        expect << f1.value(), b1.value();
        CHECK(ann.matrix.value() == expect);
    }

    SUBCASE("reversing input reverses annotations with halves swapped") {
        Tape t;
        std::vector<Var> xs, rev;
        std::vector<Matrix> vals;
        for (int i = 0; i < 5; ++i) vals.push_back(Matrix::Random(1, 3));
        for (int i = 0; i < 5; ++i) xs.push_back(t.constant(vals[static_cast<size_t>(i)]));
        for (int i = 4; i >= 0; --i) rev.push_back(t.constant(vals[static_cast<size_t>(i)]));
        // use the same cell for both directions so the symmetry is exact
        auto a = nn::encode_bidirectional(t, fwd, fwd, xs);
        auto b = nn::encode_bidirectional(t, fwd, fwd, rev);
        for (int i = 0; i < 5; ++i) {
            Matrix ai = a.matrix.value().row(i);
            Matrix bi = b.matrix.value().row(4 - i);
            Matrix swapped(1, 8);
            swapped << bi.rightCols(4), bi.leftCols(4);
            CHECK((ai - swapped).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("encode_bidirectional: empty source and count") {
    Rng rng(9);
    nn::GruCell fwd("f", 3, 4, false, rng), bwd("b", 3, 4, false, rng);
    Tape t;
    CHECK_THROWS_AS(nn::encode_bidirectional(t, fwd, bwd, {}), ContractError);

    std::vector<Var> xs;
    for (int i = 0; i < 7; ++i) xs.push_back(t.constant(Matrix::Random(1, 3)));
    auto ann = nn::encode_bidirectional(t, fwd, bwd, xs);
    CHECK(ann.matrix.rows() == 7);
    CHECK(ann.dim == 8);
}

TEST_CASE("deep_output: uniform with zero W_o, normalised, fd gradient") {
    Rng rng(10);
    const int V = 7;
    nn::Mlp f_o("f_o", {10, 6}, {Activation::Tanh}, rng);
    Parameter w_o("w_o", Matrix::Zero(6, V));

    Matrix s0 = Matrix::Random(1, 4), y0 = Matrix::Random(1, 2), psi0 = Matrix::Random(1, 4);

    SUBCASE("zero W_o gives -ln V everywhere") {
        Tape t;
        Var logp = nn::deep_output(t, f_o, w_o, t.constant(s0), t.constant(y0),
                                   t.constant(psi0));
        for (int j = 0; j < V; ++j)
            CHECK(logp.value()(0, j) == doctest::Approx(-std::log(V)).epsilon(1e-12));
    }

    SUBCASE("exp sums to one and logsumexp is zero") {
        nn::init_uniform(w_o, rng, 0.5);
        for (int trial = 0; trial < 30; ++trial) {
            Tape t;
            Var logp = nn::deep_output(t, f_o, w_o, t.constant(Matrix::Random(1, 4)),
                                       t.constant(Matrix::Random(1, 2)),
                                       t.constant(Matrix::Random(1, 4)));
            CHECK(std::abs(logp.value().array().exp().sum() - 1.0) < 1e-9);
        }
    }

    SUBCASE("gradient w.r.t. W_o matches finite differences") {
        nn::init_uniform(w_o, rng, 0.5);
        auto f = [&](Tape& t) {
            Var logp = nn::deep_output(t, f_o, w_o, t.constant(s0), t.constant(y0),
                                       t.constant(psi0));
            return ad::scale(ad::entry(logp, 0, 3), -1.0);
        };
        auto report = ad::grad_check(f, {&w_o}, 1e-5, 1e-4);
        CHECK(report.pass);
    }
}

TEST_CASE("mlp dimension check") {
    Rng rng(11);
    nn::Mlp mlp("m", {4, 3, 2}, {Activation::Tanh, Activation::None}, rng);
    Tape t;
    CHECK_THROWS_AS(mlp.apply(t, t.zeros(1, 5)), DimensionError);
    CHECK(mlp.apply(t, t.zeros(2, 4)).cols() == 2);
}
