#include <cstring>
#include <sstream>

#include "doctest.h"
#include "micro_case.hpp"
#include "oracles.hpp"
#include "pdh/evalkit.hpp"
#include "support.hpp"

using namespace pdh;

namespace {

std::vector<std::uint32_t> iota_order(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint32_t>(i);
    return v;
}

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("good/junk split examples") {
    const std::vector<GalleryRecord> others{{"a", 5, 2, false}, {"b", 6, 1, false}};
    CHECK(good_junk_split(1, 1, others).good.empty());
    const std::vector<GalleryRecord> one{{"a", 5, 2, false}, {"b", 1, 2, false}, {"c", 1, 1, false}};
    const GoodJunk s = good_junk_split(1, 1, one);
    CHECK(s.good == std::vector<std::uint32_t>{1});
    CHECK(s.junk == std::vector<std::uint32_t>{2});
}

TEST_CASE("split equals a filter-expression oracle on a 3-camera gallery") {
    Rng rng(3);
    std::vector<GalleryRecord> g;
    for (int i = 0; i < 300; ++i) {
        const bool d = rng.below(10) == 0;
        g.push_back({"", d ? -1 : int(rng.below(12)), 1 + int(rng.below(3)), d});
    }
    for (int id = 0; id < 12; ++id) {
        for (int cam = 1; cam <= 3; ++cam) {
            for (DistractorMode mode : {DistractorMode::Junk, DistractorMode::Noise}) {
                std::vector<std::uint32_t> good, junk;
                for (std::uint32_t i = 0; i < g.size(); ++i) {
                    if (!g[i].is_distractor && g[i].identity == id && g[i].camera != cam) good.push_back(i);
                    if ((!g[i].is_distractor && g[i].identity == id && g[i].camera == cam) ||
                        (g[i].is_distractor && mode == DistractorMode::Junk))
                        junk.push_back(i);
                }
                const GoodJunk s = good_junk_split(id, cam, g, mode);
                CHECK(s.good == good);
                CHECK(s.junk == junk);
            }
        }
    }
}

TEST_CASE("average precision closed forms") {
    GoodJunk one{{4}, {}};
    const std::vector<std::uint32_t> o1{4, 1, 2};
    CHECK(*average_precision(o1, one) == 1.0);
    // Good at ranks 1 and 3 after removing junk item 9.
    GoodJunk two{{0, 3}, {9}};
    const std::vector<std::uint32_t> o2{0, 9, 5, 3, 7};
    CHECK(*average_precision(o2, two) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK_FALSE(average_precision(o2, GoodJunk{{}, {1}}).has_value());
    const QueryScore qs = score_ranking(o2, two);
    CHECK(*qs.first == 1);
}

TEST_CASE("AP equals a brute-force prefix-precision oracle on random 200-item rankings") {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        std::vector<GalleryRecord> g;
        for (int i = 0; i < 200; ++i) {
            const bool d = rng.below(10) == 0;
            g.push_back({"", d ? -1 : int(rng.below(6)), 1 + int(rng.below(3)), d});
        }
        auto order = iota_order(200);
        for (std::size_t i = 199; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
        const int id = int(rng.below(6)), cam = 1 + int(rng.below(3));
        const auto got = score_ranking(order, good_junk_split(id, cam, g));
        const auto want = oracle::brute_score(order, id, cam, g);
        REQUIRE(got.ap.has_value() == want.ap.has_value());
        if (!want.ap) continue;
        CHECK(*got.ap == *want.ap);
        CHECK(got.first == want.first);
    }
}

TEST_CASE("AP is one exactly when good items fill the top ranks") {
    GoodJunk s{{2, 5, 7}, {1}};
    const std::vector<std::uint32_t> top{1, 5, 2, 7, 0, 3};
    CHECK(*average_precision(top, s) == 1.0);
    const std::vector<std::uint32_t> not_top{5, 2, 0, 7, 1, 3};
    CHECK(*average_precision(not_top, s) < 1.0);
}

TEST_CASE("inserting junk never changes AP or first rank") {
    Rng rng(9);
    for (int t = 0; t < 50; ++t) {
        GoodJunk s;
        std::vector<std::uint32_t> order;
        for (std::uint32_t i = 0; i < 40; ++i) {
            order.push_back(i);
            if (rng.below(4) == 0) s.good.push_back(i);
        }
        if (s.good.empty()) s.good.push_back(0);
        for (std::size_t i = 39; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
        const QueryScore before = score_ranking(order, s);
        GoodJunk with_junk = s;
        std::vector<std::uint32_t> noisy = order;
        for (std::uint32_t j = 40; j < 60; ++j) {
            noisy.insert(noisy.begin() + static_cast<std::ptrdiff_t>(rng.below(noisy.size() + 1)), j);
            with_junk.junk.push_back(j);
        }
        const QueryScore after = score_ranking(noisy, with_junk);
        CHECK(*after.ap == *before.ap);
        CHECK(after.first == before.first);
    }
}

TEST_CASE("perfect codes give rank-1 and mAP of one") {
    Rng rng(11);
    std::vector<QueryRecord> qs;
    std::vector<BitCode> qc;
    std::vector<GalleryRecord> g;
    CodeIndex gi(64);
    for (int id = 0; id < 30; ++id) {
        const BitCode c = micro::random_code(rng, 64);
        qs.push_back({"q" + std::to_string(id), id, 1});
        qc.push_back(c);
        g.push_back({"g" + std::to_string(id), id, 2, false});
        gi.add(c, g.back().id);
    }
    const EvalReport r = evaluate(qs, qc, g, gi);
    CHECK(r.cmc[0] == 1.0);
    CHECK(r.mAP == 1.0);
    CHECK(r.query_count == 30);
}

TEST_CASE("random codes give rank-1 near 1/g") {
    Rng rng(13);
    const int g = 20, trials = 4000;
    std::vector<GalleryRecord> gallery;
    CodeIndex gi(64);
    for (int id = 0; id < g; ++id) {
        gallery.push_back({"g" + std::to_string(id), id, 2, false});
        gi.add(micro::random_code(rng, 64), gallery.back().id);
    }
    std::vector<QueryRecord> qs;
    std::vector<BitCode> qc;
    for (int t = 0; t < trials; ++t) {
        qs.push_back({"q", int(rng.below(g)), 1});
        qc.push_back(micro::random_code(rng, 64));
    }
    const EvalReport r = evaluate(qs, qc, gallery, gi);
    const double p = 1.0 / g, sigma = std::sqrt(p * (1 - p) / trials);
    CHECK(std::abs(r.cmc[0] - p) <= 3 * sigma);
}

TEST_CASE("hand-computed micro case") {
    const auto g = micro::gallery();
    const auto gi = micro::gallery_codes();
    const auto qs = micro::queries();
    const auto qc = micro::query_codes();
    const EvalReport r = evaluate(qs, qc, g, gi, {micro::kMaxRank, DistractorMode::Junk});
    CHECK(r.query_count == 2);
    CHECK(r.skipped == 1);
    CHECK(r.mAP == doctest::Approx(11.0 / 24.0).epsilon(1e-15));
    CHECK(r.cmc == std::vector<double>{0.0, 0.5, 1.0, 1.0, 1.0});
    std::ostringstream txt, csv;
    write_report_text(txt, r);
    write_cmc_csv(csv, r);
    CHECK(txt.str() == micro::kReportText);
    CHECK(csv.str() == micro::kCmcCsv);
    CHECK(summary_line(r) == micro::kSummary);
}

TEST_CASE("distractors as ranking noise") {
    const auto g = micro::gallery();
    const auto gi = micro::gallery_codes();
    const auto qs = micro::queries();
    const auto qc = micro::query_codes();
    // q0 keeps g5 in place: g1 g3 g5 g0 g4 -> good at 4 and 5.
    // q1: g2 g1 g3 g5 g0 g4 -> good at 2.
    const EvalReport r = evaluate(qs, qc, g, gi, {micro::kMaxRank, DistractorMode::Noise});
    CHECK(r.mAP == doctest::Approx(((1.0 / 4 + 2.0 / 5) / 2 + 0.5) / 2).epsilon(1e-15));
    CHECK(r.cmc == std::vector<double>{0.0, 0.5, 0.5, 1.0, 1.0});
}

TEST_CASE("evaluate matches the brute-force oracle and its serial reference") {
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        const micro::Instance in = micro::random_instance(rng);
        const auto want = oracle::brute_evaluate(in.queries, in.query_codes, in.gallery, in.gallery_codes, 20);
        if (want.scored == 0) {
            CHECK_THROWS_AS(evaluate(in.queries, in.query_codes, in.gallery, in.gallery_codes, {20}),
                            EvaluationError);
            continue;
        }
        const EvalReport got = evaluate(in.queries, in.query_codes, in.gallery, in.gallery_codes, {20});
        const EvalReport serial = evaluate_serial(in.queries, in.query_codes, in.gallery, in.gallery_codes, {20});
        CHECK(got.cmc == want.cmc);
        CHECK(got.mAP == want.mAP);
        CHECK(got.query_count == want.scored);
        CHECK(got.skipped == want.skipped);
        CHECK(serial.cmc == got.cmc);
        CHECK(serial.mAP == got.mAP);
        for (std::size_t r = 1; r < got.cmc.size(); ++r) CHECK(got.cmc[r - 1] <= got.cmc[r]);
        CHECK(got.mAP >= 0.0);
        CHECK(got.mAP <= 1.0);
    }
}

TEST_CASE("evaluation input checks") {
    const auto g = micro::gallery();
    const auto gi = micro::gallery_codes();
    const auto qs = micro::queries();
    auto qc = micro::query_codes();
    qc.pop_back();
    CHECK_THROWS_AS(evaluate(qs, qc, g, gi), EvaluationError);
    auto long_codes = micro::query_codes();
    long_codes[0] = BitCode(9);
    CHECK_THROWS_AS(evaluate(qs, long_codes, g, gi), DimensionError);
    CHECK_THROWS_AS(evaluate(qs, micro::query_codes(), g, gi, {0}), ConfigError);
    const std::vector<QueryRecord> hopeless{{"q", 99, 1}};
    const std::vector<BitCode> one(1, BitCode(8));
    CHECK_THROWS_AS(evaluate(hopeless, one, g, gi), EvaluationError);
}

TEST_CASE("EvalReport rank lookup") {
    EvalReport r;
    r.cmc = {0.25, 0.5};
    CHECK(*r.rank(1) == 0.25);
    CHECK(*r.rank(2) == 0.5);
    CHECK_FALSE(r.rank(0));
    CHECK_FALSE(r.rank(3));
}

TEST_CASE("pooling examples") {
    const std::vector<std::vector<double>> single{{0.2, 0.9, 0.5}};
    CHECK(pool_queries(single, Pooling::Avg) == single[0]);
    CHECK(pool_queries(single, Pooling::Max) == single[0]);
    CHECK(pool_queries(single, Pooling::Single) == single[0]);
    const std::vector<std::vector<double>> two{{0, 1}, {1, 1}};
    const auto avg = pool_queries(two, Pooling::Avg);
    CHECK(avg == std::vector<double>{0.5, 1.0});
    CHECK(binarize(avg).to_string() == "01");
    CHECK(pool_queries(two, Pooling::Max) == std::vector<double>{1.0, 1.0});
    CHECK_THROWS_AS(pool_queries({}, Pooling::Avg), DomainError);
    CHECK_THROWS_AS(pool_queries(two, Pooling::Single), DomainError);
    const std::vector<std::vector<double>> ragged{{0.1}, {0.1, 0.2}};
    CHECK_THROWS_AS(pool_queries(ragged, Pooling::Avg), DimensionError);
    const std::vector<std::vector<double>> out_of_range{{1.2}};
    CHECK_THROWS_AS(pool_queries(out_of_range, Pooling::Max), DomainError);
}

TEST_CASE("max pooling dominates average pooling; identical vectors are fixed points") {
    Rng rng(19);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::vector<double>> v(1 + rng.below(6), std::vector<double>(16));
        for (auto& row : v)
            for (double& x : row) x = rng.uniform();
        const auto mx = pool_queries(v, Pooling::Max), av = pool_queries(v, Pooling::Avg);
        for (std::size_t i = 0; i < 16; ++i) CHECK(mx[i] >= av[i]);
        const std::vector<std::vector<double>> same(4, v[0]);
        const auto id = pool_queries(same, Pooling::Avg);
        for (std::size_t i = 0; i < 16; ++i) CHECK(id[i] == doctest::Approx(v[0][i]).epsilon(1e-15));
    }
}

TEST_CASE("pool_by_group merges by identity and camera in first-seen order") {
    const std::vector<QueryRecord> qs{{"a", 3, 1}, {"b", 1, 1}, {"c", 3, 1}, {"d", 3, 2}, {"e", 1, 1}};
    const std::vector<std::vector<double>> rel{{0.9, 0.1}, {0.2, 0.2}, {0.3, 0.1}, {0.8, 0.8}, {0.9, 0.9}};
    const PooledQueries avg = pool_by_group(qs, rel, Pooling::Avg);
    REQUIRE(avg.records.size() == 3);
    CHECK(avg.records[0].id == "a");
    CHECK(avg.records[1].id == "b");
    CHECK(avg.records[2].id == "d");
    CHECK(avg.codes[0].to_string() == "10");  // (0.6, 0.1)
    CHECK(avg.codes[1].to_string() == "11");  // (0.55, 0.55)
    const PooledQueries single = pool_by_group(qs, rel, Pooling::Single);
    CHECK(single.records.size() == 5);
    CHECK(single.codes[2].to_string() == "00");
    CHECK_THROWS_AS(pool_by_group(qs, std::span(rel).first(2), Pooling::Avg), EvaluationError);
}

TEST_CASE("single pooling equals avg pooling on single-image queries") {
    Rng rng(23);
    std::vector<QueryRecord> qs;
    std::vector<std::vector<double>> rel;
    for (int i = 0; i < 10; ++i) {
        qs.push_back({"q" + std::to_string(i), i, 1});
        rel.push_back(std::vector<double>(12));
        for (double& x : rel.back()) x = rng.uniform();
    }
    CHECK(pool_by_group(qs, rel, Pooling::Single).codes == pool_by_group(qs, rel, Pooling::Avg).codes);
}

TEST_CASE("pooling names") {
    for (Pooling p : {Pooling::Single, Pooling::Avg, Pooling::Max}) CHECK(parse_pooling(to_string(p)) == p);
    CHECK_THROWS_AS(parse_pooling("mean"), ConfigError);
}

TEST_CASE("label tables round-trip") {
    const auto g = micro::gallery();
    std::ostringstream o;
    write_labels_csv(o, g);
    CHECK(o.str().rfind("id,identity,camera,distractor\ng0,1,2,0\n", 0) == 0);
    std::istringstream in(o.str());
    const auto back = read_labels_csv(in);
    REQUIRE(back.size() == g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(back[i].id == g[i].id);
        CHECK(back[i].identity == g[i].identity);
        CHECK(back[i].camera == g[i].camera);
        CHECK(back[i].is_distractor == g[i].is_distractor);
    }
    std::ostringstream again;
    write_labels_csv(again, back);
    CHECK(again.str() == o.str());
    const std::vector<GalleryRecord> comma{{"a,b", 1, 1, false}};
    std::ostringstream bad;
    CHECK_THROWS_AS(write_labels_csv(bad, comma), IngestionError);
    std::istringstream wrong_header("id,label\n");
    CHECK_THROWS_AS(read_labels_csv(wrong_header), IngestionError);
    std::istringstream bad_row("id,identity,camera,distractor\nx,1,two,0\n");
    CHECK_THROWS_AS(read_labels_csv(bad_row), IngestionError);
}

TEST_CASE("relaxed code files round-trip bit-exactly") {
    Rng rng(29);
    RelaxedSet s{7, {}, {}};
    for (int i = 0; i < 5; ++i) {
        s.ids.push_back("r" + std::to_string(i));
        s.values.emplace_back(7);
        for (double& x : s.values.back()) x = rng.uniform();
    }
    s.values[0][0] = 0.0;
    s.values[0][1] = 1.0;
    std::ostringstream a;
    write_relaxed(s, a);
    CHECK(a.str().rfind("PDHRLX1\n", 0) == 0);
    std::istringstream in(a.str());
    CHECK(read_relaxed(in) == s);

    std::string out_of_range = a.str();
    const std::size_t first_value = 8 + 16 + 4 + 2;
    const double bad = 2.0;
    std::memcpy(out_of_range.data() + first_value, &bad, 8);
    std::istringstream r1(out_of_range);
    CHECK_THROWS_AS(read_relaxed(r1), FormatError);
    std::istringstream r2(a.str() + "!");
    CHECK_THROWS_AS(read_relaxed(r2), FormatError);
    std::istringstream r3(a.str().substr(0, 40));
    CHECK_THROWS_AS(read_relaxed(r3), FormatError);
    RelaxedSet ragged = s;
    ragged.values[2].pop_back();
    std::ostringstream sink;
    CHECK_THROWS_AS(write_relaxed(ragged, sink), DimensionError);
}

}  // TEST_SUITE
