#pragma once

// Six-record worked example with hand-assigned distances.
//
// Every query code is all zeros, so a gallery item's distance is its popcount:
//   g0 id1 cam2  d=3   g1 id2 cam2  d=1   g2 id1 cam1  d=0
//   g3 id3 cam1  d=2   g4 id1 cam3  d=5   g5 distractor d=2
// Ranking (stable): g2 g1 g3 g5 g0 g4.
//
// q0 id1 cam1: junk g2 (same camera), g5 (distractor); kept g1 g3 g0 g4;
//    good g0, g4 at ranks 3 and 4: AP = (1/3 + 2/4) / 2 = 5/12, first = 3.
// q1 id2 cam1: junk g5; kept g2 g1 g3 g0 g4; good g1 at rank 2: AP = 1/2.
// q2 id4 cam1: no good match, skipped.
// mAP = (5/12 + 1/2) / 2 = 11/24; CMC over 5 ranks: 0, 0.5, 1, 1, 1.

#include <string>
#include <vector>

#include "pdh/evalkit.hpp"
#include "pdh/hamcode.hpp"
#include "pdh/rng.hpp"

namespace micro {

inline std::vector<pdh::GalleryRecord> gallery() {
    return {{"g0", 1, 2, false}, {"g1", 2, 2, false}, {"g2", 1, 1, false},
            {"g3", 3, 1, false}, {"g4", 1, 3, false}, {"g5", -1, 3, true}};
}

inline pdh::CodeIndex gallery_codes() {
    pdh::CodeIndex idx(8);
    for (const char* bits : {"11100000", "10000000", "00000000", "11000000", "11111000", "00000011"}) {
        idx.add(pdh::BitCode::from_string(bits), "");
    }
    std::vector<std::string> ids{"g0", "g1", "g2", "g3", "g4", "g5"};
    pdh::CodeIndex named(8);
    for (std::size_t i = 0; i < 6; ++i) named.add(idx.code(i), ids[i]);
    return named;
}

inline std::vector<pdh::QueryRecord> queries() { return {{"q0", 1, 1}, {"q1", 2, 1}, {"q2", 4, 1}}; }

inline std::vector<pdh::BitCode> query_codes() { return std::vector<pdh::BitCode>(3, pdh::BitCode(8)); }

inline constexpr std::size_t kMaxRank = 5;

inline const std::string kReportText =
    "queries scored: 2\n"
    "queries skipped: 1\n"
    "mAP: 0.458333\n"
    "rank-1: 0.000000\n"
    "rank-5: 1.000000\n";

inline const std::string kCmcCsv =
    "rank,cmc\n"
    "1,0.000000\n"
    "2,0.500000\n"
    "3,1.000000\n"
    "4,1.000000\n"
    "5,1.000000\n";

inline const std::string kSummary = "rank1=0.000000 rank5=1.000000 rank10=n/a rank20=n/a mAP=0.458333 skipped=1";

// Random evaluation instance: up to 200 gallery records over few identities
// and cameras, some distractors, short codes so that ties are frequent.
struct Instance {
    std::vector<pdh::QueryRecord> queries;
    std::vector<pdh::BitCode> query_codes;
    std::vector<pdh::GalleryRecord> gallery;
    pdh::CodeIndex gallery_codes;
};

inline pdh::BitCode random_code(pdh::Rng& rng, std::size_t bits) {
    pdh::BitCode c(bits);
    for (std::size_t i = 0; i < bits; ++i) c.set(i, rng.below(2) == 1);
    return c;
}

inline Instance random_instance(pdh::Rng& rng) {
    Instance in;
    const std::size_t bits = 4 + rng.below(13);
    const int ids = 2 + static_cast<int>(rng.below(8));
    const int cams = 2 + static_cast<int>(rng.below(3));
    const std::size_t g = 1 + rng.below(200);
    in.gallery_codes = pdh::CodeIndex(bits);
    for (std::size_t i = 0; i < g; ++i) {
        const bool distractor = rng.below(8) == 0;
        const int id = distractor ? -1 : static_cast<int>(rng.below(ids));
        in.gallery.push_back({"g" + std::to_string(i), id, 1 + static_cast<int>(rng.below(cams)), distractor});
        in.gallery_codes.add(random_code(rng, bits), in.gallery.back().id);
    }
    const std::size_t q = 1 + rng.below(20);
    for (std::size_t i = 0; i < q; ++i) {
        in.queries.push_back({"q" + std::to_string(i), static_cast<int>(rng.below(ids + 1)),
                              1 + static_cast<int>(rng.below(cams))});
        in.query_codes.push_back(random_code(rng, bits));
    }
    return in;
}

}  // namespace micro
