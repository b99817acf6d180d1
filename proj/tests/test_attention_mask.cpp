// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "clueseek/synthetic.hpp"
#include "clueseek/attention_mask.hpp"

using namespace clueseek;

namespace {

// Brute-force oracle: per-pair application of the masking rule on causal
// pairs, straight from the sequence annotations.
bool oracle_blocked(const AnnotatedSequence & seq, int i, int j) {
    if (j >= i) return false;
    const auto phase = seq.phase_at(i);
    if (!phase) return false;
    const SegmentKind kind = seq.kind_at(j);
    return (*phase == Phase::Tool && kind == SegmentKind::LocalVisual) ||
           (*phase == Phase::Answer && kind == SegmentKind::GlobalVisual);
}

std::string oracle_dense(const AnnotatedSequence & seq) {
    std::string out;
    for (int i = 0; i < seq.length; ++i) {
        for (int j = 0; j < seq.length; ++j) {
            const bool visible = j <= i && !oracle_blocked(seq, i, j);
            out += visible ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

AnnotatedSequence example_sequence() {
    AnnotatedSequence seq;
    seq.length   = 14;
    seq.segments = {{SegmentKind::GlobalVisual, 0, 4},
                    {SegmentKind::Text, 4, 8},
                    {SegmentKind::LocalVisual, 8, 12},
                    {SegmentKind::Text, 12, 14}};
    seq.generated = {{6, 8, Phase::Tool}, {12, 14, Phase::Answer}};
    return seq;
}

AnnotatedSequence random_sequence(DetRng & rng, int max_len) {
    AnnotatedSequence seq;
    seq.length = 2 + static_cast<int>(rng.below(static_cast<uint64_t>(max_len - 1)));
    int pos = 0;
    while (pos < seq.length) {
        const int len = 1 + static_cast<int>(rng.below(8));
        const int end = std::min(seq.length, pos + len);
        const SegmentKind kind = static_cast<SegmentKind>(rng.below(3));
        seq.segments.push_back({kind, pos, end});
        if (kind == SegmentKind::Text && rng.below(2) == 0) {
            seq.generated.push_back(
                {pos, end, rng.below(2) == 0 ? Phase::Tool : Phase::Answer});
        }
        pos = end;
    }
    return seq;
}

} // namespace

TEST_CASE("worked sequence blocks the overview for answer rows only") {
    const MaskSpec m = build_mask(example_sequence());

    // tool-phase rows 6,7: nothing blocked (local tokens appear only later)
    CHECK_FALSE(m.blocked.count(6));
    CHECK_FALSE(m.blocked.count(7));

    // answer-phase rows 12,13: overview columns 0..3 blocked, local 8..11 visible
    for (int row : {12, 13}) {
        for (int col = 0; col < 4; ++col) {
            CHECK(m.is_blocked(row, col));
            CHECK_FALSE(m.is_visible(row, col));
        }
        for (int col = 8; col < 12; ++col) {
            CHECK(m.is_visible(row, col));
        }
    }
    // non-generated rows stay purely causal
    for (int col = 0; col < 8; ++col) {
        CHECK(m.is_visible(8, col));
    }
}

TEST_CASE("pure-text sequences block nothing") {
    AnnotatedSequence seq;
    seq.length    = 10;
    seq.segments  = {{SegmentKind::Text, 0, 10}};
    seq.generated = {{4, 10, Phase::Answer}};
    const MaskSpec m = build_mask(seq);
    CHECK(m.blocked.empty());
}

TEST_CASE("random sequences match the brute-force oracle") {
    DetRng rng(71);
    for (int trial = 0; trial < 200; ++trial) {
        const AnnotatedSequence seq = random_sequence(rng, 64);
        const MaskSpec          m   = build_mask(seq);
        CHECK(export_mask(m, MaskFormat::Dense01) == oracle_dense(seq));
    }
}

TEST_CASE("phase rules never overlap") {
    DetRng rng(72);
    for (int trial = 0; trial < 100; ++trial) {
        const AnnotatedSequence seq = random_sequence(rng, 48);
        const MaskSpec          m   = build_mask(seq);
        for (const auto & [row, ranges] : m.blocked) {
            const auto phase = seq.phase_at(row);
            REQUIRE(phase.has_value());
            for (const auto & [lo, hi] : ranges) {
                for (int col = lo; col < hi; ++col) {
                    CHECK(col < row);
                    if (*phase == Phase::Tool) {
                        CHECK(seq.kind_at(col) == SegmentKind::LocalVisual);
                    } else {
                        CHECK(seq.kind_at(col) == SegmentKind::GlobalVisual);
                    }
                }
            }
        }
    }
}

TEST_CASE("a generated span without a phase is an error") {
    AnnotatedSequence seq;
    seq.length    = 6;
    seq.segments  = {{SegmentKind::Text, 0, 6}};
    seq.generated = {{2, 4, std::nullopt}};
    try {
        build_mask(seq);
        FAIL("expected UnlabeledPhase");
    } catch (const Error & e) {
        CHECK(e.code() == ErrorCode::UnlabeledPhase);
    }
}

TEST_CASE("segments must partition the sequence") {
    AnnotatedSequence seq;
    seq.length   = 6;
    seq.segments = {{SegmentKind::Text, 0, 4}}; // hole at the end
    CHECK_THROWS_AS(build_mask(seq), Error);
}

TEST_CASE("should_apply boundaries and determinism") {
    CHECK_FALSE(should_apply("any", 0.0, 7));
    CHECK(should_apply("any", 1.0, 7));
    CHECK(should_apply("id-1", 0.37, 3) == should_apply("id-1", 0.37, 3));
}

TEST_CASE("should_apply converges to the requested ratio") {
    int applied = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        if (should_apply("sample-" + std::to_string(i), 0.1, 99)) ++applied;
    }
    const double rate = static_cast<double>(applied) / n;
    CHECK(rate > 0.09);
    CHECK(rate < 0.11);
}

TEST_CASE("dense01 of a causal-only mask is lower-triangular ones") {
    MaskSpec m;
    m.length = 3;
    CHECK(export_mask(m, MaskFormat::Dense01) == "100\n110\n111\n");
}

TEST_CASE("export formats decode to the same blocked set") {
    DetRng rng(73);
    for (int trial = 0; trial < 50; ++trial) {
        const MaskSpec m = build_mask(random_sequence(rng, 40));
        CHECK(import_mask(export_mask(m, MaskFormat::BlockedRanges), MaskFormat::BlockedRanges) == m);
        CHECK(import_mask(export_mask(m, MaskFormat::Dense01), MaskFormat::Dense01) == m);
    }
}

TEST_CASE("annotated sequence document round trip") {
    const AnnotatedSequence seq = example_sequence();
    const AnnotatedSequence reparsed = parse_annotated_sequence(serialize_annotated_sequence(seq));
    CHECK(reparsed.length == seq.length);
    CHECK(export_mask(build_mask(reparsed), MaskFormat::Dense01) ==
          export_mask(build_mask(seq), MaskFormat::Dense01));
}
