#include "qsc/errors.hpp"
#include "qsc/pipeline.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>

using namespace qsc;

namespace {

std::vector<NamedCloud> named(std::mt19937_64& rng, std::size_t count, std::size_t points) {
    std::vector<NamedCloud> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back({"c" + std::to_string(i), test::random_f32_cloud(rng, points)});
    return out;
}

std::vector<TableRow> reference_rows() {
    std::vector<TableRow> rows;
    for (const auto& r : kReferenceTable)
        if (r.n != kRawCodeLength)
            rows.push_back({r.n, r.total_ms});
    return rows;
}

double table_total(std::size_t n) {
    for (const auto& r : kReferenceTable)
        if (r.n == n)
            return r.total_ms;
    return 0.0;
}

}  // namespace

TEST_CASE("round timing") {
    SUBCASE("single raw cloud at zero overhead") {
        TimingModel t{0.0, 37'360.0, 0.0, 0.0};
        std::mt19937_64 rng(1);
        const auto ds = named(rng, 1, 2048);
        const auto rep = simulate_run(ds, BaselineCodec(6144), t, ChannelParams{}, 1);
        CHECK(rep.rounds == 1);
        CHECK(rep.total_time_ms == doctest::Approx(6144.0 * 32.0 / 37'360.0 * 1000.0).epsilon(1e-12));
    }
    SUBCASE("ceiling rule") {
        CHECK(rounds_for(6, 3) == 2);
        CHECK(rounds_for(7, 3) == 3);
        CHECK(rounds_for(kReferenceDatasetSize, 3) == 3421);
        CHECK_THROWS_AS(rounds_for(6, 0), ArgumentError);
    }
    SUBCASE("partial last round pays only for its clouds") {
        TimingModel t{100.0, 1000.0, 0.0, 0.0};
        std::mt19937_64 rng(2);
        const auto ds = named(rng, 4, 3);
        const auto rep = simulate_run(ds, BaselineCodec(9), t, ChannelParams{}, 3);
        CHECK(rep.rounds == 2);
        CHECK(rep.total_time_ms == doctest::Approx(100.0 + 3 * 9 * 32.0 + 100.0 + 9 * 32.0).epsilon(1e-12));
    }
    SUBCASE("codec latencies add per cloud") {
        TimingModel t{0.0, 1e6, 2.0, 1.5};
        std::mt19937_64 rng(3);
        const auto ds = named(rng, 6, 3);
        const auto rep = simulate_run(ds, BaselineCodec(9), t, ChannelParams{}, 3);
        CHECK(rep.total_time_ms == doctest::Approx(6 * 9 * 32.0 / 1000.0 + 6 * 3.5).epsilon(1e-12));
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(validate(TimingModel{-1.0, 1.0, 0.0, 0.0}), ValidationError);
        CHECK_THROWS_AS(validate(TimingModel{0.0, 0.0, 0.0, 0.0}), ValidationError);
    }
}

TEST_CASE("full-size n=50 run against the fitted timing model") {
    // Timing only depends on code lengths, so single-point clouds with
    // in-memory external codes stand in for the real test set.
    const auto fit = calibrate_timing(reference_rows(), kReferenceDatasetSize, kReferenceBatch);
    std::vector<NamedCloud> ds;
    std::vector<EncodedCloud> codes;
    std::map<std::string, PointCloud> recon;
    ds.reserve(kReferenceDatasetSize);
    for (std::size_t i = 0; i < kReferenceDatasetSize; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "s%05zu", i);
        PointCloud c({{double(i % 7), 0.0, 1.0}});
        ds.push_back({id, c});
        recon.emplace(id, c);
        codes.push_back({id, SemanticCode(std::vector<double>(50, 1.0)), 1.0});
    }
    const ExternalCodec codec(codes, recon);
    const auto rep = simulate_run(ds, codec, fit.model, ChannelParams{}, kReferenceBatch);
    CHECK(rep.rounds == 3421);
    CHECK(rep.mean_cd == 0.0);
    CHECK(std::abs(rep.total_time_ms - 2'708'329.0) / 2'708'329.0 <= 0.20);
}

TEST_CASE("run errors name the cloud") {
    std::mt19937_64 rng(4);
    const auto ds = named(rng, 3, 3);
    std::vector<EncodedCloud> codes{{"c0", SemanticCode({1.0}), 1.0}};
    const ExternalCodec codec(codes, {{"c0", ds[0].cloud}});
    try {
        simulate_run(ds, codec, TimingModel{}, ChannelParams{}, 3);
        FAIL("expected RunError");
    } catch (const RunError& e) {
        CHECK(e.cloud_id() == "c1");
    }
    CHECK_THROWS_AS(simulate_run(std::vector<NamedCloud>{}, BaselineCodec(3), TimingModel{}, ChannelParams{}, 3),
                    ArgumentError);
}

TEST_CASE("effective data rate") {
    CHECK(compute_edr(2'017'394'688ULL, 1'244'715.0) == doctest::Approx(1'620'770.0).epsilon(1e-5));
    CHECK(compute_edr(1000, 1000.0) == 1000.0);
    CHECK(compute_edr(0, 5.0) == 0.0);
    CHECK_THROWS_AS(compute_edr(10, 0.0), ArgumentError);
    CHECK(std::uint64_t{kReferenceDatasetSize} * kReferencePoints * 3 * 32 == 2'017'394'688ULL);
}

TEST_CASE("relative transmission efficiency") {
    CHECK(std::abs(compute_rte(57'636'000.0, 1'244'715.0) - 46.30) <= 0.005);
    CHECK(std::abs(compute_rte(57'636'000.0, 2'708'329.0) - 21.28) <= 0.005);
    for (const auto& r : kReferenceTable)
        CHECK(std::abs(compute_rte(57'636'000.0, r.total_ms) - r.rte) <= 0.005);
    for (double t : {1e-3, 1.0, 57'636'000.0})
        CHECK(compute_rte(t, t) == 1.0);
    CHECK_THROWS_AS(compute_rte(1.0, 0.0), ArgumentError);
}

TEST_CASE("timing calibration") {
    SUBCASE("noiseless synthetic rows") {
        // totals generated the way the fit reads them: rounds * per-round time
        const double rounds = 3421.0;
        std::vector<TableRow> rows;
        for (std::size_t n : {10u, 300u})
            rows.push_back({n, rounds * (300.0 + 3.0 * n * 32.0 / 15'000.0 * 1000.0)});
        const auto fit = calibrate_timing(rows, kReferenceDatasetSize, 3);
        CHECK(std::abs(fit.model.per_round_overhead_ms - 300.0) / 300.0 <= 1e-6);
        CHECK(std::abs(fit.model.effective_rate_bps - 15'000.0) / 15'000.0 <= 1e-6);
        for (double r : fit.residuals_ms)
            CHECK(std::abs(r) < 1e-9);
    }
    SUBCASE("two-point fit on the n=10 and n=300 rows") {
        const std::vector<TableRow> rows{{10, table_total(10)}, {300, table_total(300)}};
        const auto fit = calibrate_timing(rows, kReferenceDatasetSize, 3);
        CHECK(fit.rounds == 3421);
        // per-round times 363.85 and 2201.36 ms at 960 and 28800 bits
        const double slope = (7'530'870.0 / 3421 - 1'244'715.0 / 3421) / (28'800.0 - 960.0);
        CHECK(fit.model.effective_rate_bps == doctest::Approx(1000.0 / slope).epsilon(1e-9));
        CHECK(fit.model.effective_rate_bps == doctest::Approx(15'150.0).epsilon(2e-3));
        CHECK(fit.model.per_round_overhead_ms == doctest::Approx(300.5).epsilon(1e-3));
    }
    SUBCASE("all six rows give one residual per row") {
        const auto fit = calibrate_timing(reference_rows(), kReferenceDatasetSize, 3);
        CHECK(fit.residuals_ms.size() == 6);
        double sum = 0.0;
        for (double r : fit.residuals_ms)
            sum += r;
        CHECK(std::abs(sum) < 1e-6);
    }
    SUBCASE("errors") {
        const std::vector<TableRow> one{{10, 1e6}};
        CHECK_THROWS_AS(calibrate_timing(one, 100, 3), CalibrationError);
        const std::vector<TableRow> same{{10, 1e6}, {10, 2e6}};
        CHECK_THROWS_AS(calibrate_timing(same, 100, 3), CalibrationError);
    }
}

TEST_CASE("batch saturation") {
    SUBCASE("pure rate-limited timing is neutral to batching") {
        const auto r = batch_saturation_report(TimingModel{0.0, 15'000.0, 0.0, 0.0}, 10, 10'261);
        CHECK(r.reduction == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("overhead-limited timing approaches the round-count ratio") {
        const auto r = batch_saturation_report(TimingModel{300.0, 1e18, 0.0, 0.0}, 10, 10'261);
        const double limit = 1.0 - double(rounds_for(10'261, 32)) / double(rounds_for(10'261, 3));
        CHECK(r.reduction == doctest::Approx(limit).epsilon(1e-9));
        CHECK(limit == doctest::Approx(0.906).epsilon(2e-3));
    }
    SUBCASE("two-point reference-table fit at n=10") {
        const std::vector<TableRow> rows{{10, table_total(10)}, {300, table_total(300)}};
        const auto fit = calibrate_timing(rows, kReferenceDatasetSize, 3);
        const auto r = batch_saturation_report(fit.model, 10, kReferenceDatasetSize);
        CHECK(r.reduction >= 0.45);
        CHECK(r.reduction <= 0.75);
    }
    SUBCASE("total time is nonincreasing in batch size") {
        const TimingModel t{250.0, 16'000.0, 1.0, 1.0};
        double prev = total_time_ms(t, 50, 1000, 1);
        for (std::size_t b = 2; b <= 64; ++b) {
            const double cur = total_time_ms(t, 50, 1000, b);
            CHECK(cur <= prev * (1.0 + 1e-12));
            prev = cur;
        }
    }
}

TEST_CASE("report invariants") {
    std::mt19937_64 rng(5);
    for (std::size_t count : {1u, 2u, 5u, 9u}) {
        const auto ds = named(rng, count, 6);
        const auto rep = simulate_run(ds, BaselineCodec(18), TimingModel{120.0, 9000.0, 1.0, 0.5}, ChannelParams{}, 2);
        CHECK(rep.total_bits == count * 6 * 3 * 32);
        CHECK(rep.edr_bps * (rep.total_time_ms / 1000.0) ==
              doctest::Approx(double(rep.total_bits)).epsilon(4 * std::numeric_limits<double>::epsilon()));
        CHECK(rep.mean_cd < 1e-9);
    }
}

TEST_CASE("raw time override drives RTE") {
    std::mt19937_64 rng(6);
    const auto ds = named(rng, 3, 3);
    const TimingModel t{10.0, 1000.0, 0.0, 0.0};
    const auto rep = simulate_run(ds, BaselineCodec(9), t, ChannelParams{}, 3, {5000.0});
    CHECK(rep.rte == doctest::Approx(5000.0 / rep.total_time_ms).epsilon(1e-15));
    const auto raw_rep = simulate_run(ds, BaselineCodec(9), t, ChannelParams{}, 3);
    CHECK(raw_rep.rte == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("payload packing") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<EncodedCloud> codes;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> v(3 + i);
        for (auto& x : v)
            x = static_cast<float>(u(rng));
        codes.push_back({"k" + std::to_string(i), SemanticCode(v), 0.5 + i});
    }
    const Bits bits = pack_codes(codes);
    CHECK(bits.size() == (3 + 4 + 5 + 6 + 7) * 32);
    CHECK(unpack_codes(bits, codes) == codes);
    CHECK_THROWS_AS(unpack_codes(Bits(31), codes), FormatError);

    // 1.0f = 0x3F800000, least significant bit first
    const std::vector<EncodedCloud> one{{"x", SemanticCode({1.0}), 1.0}};
    const Bits b = pack_codes(one);
    for (int i = 0; i < 32; ++i)
        CHECK(b[i] == ((0x3F800000u >> i) & 1u));
}

TEST_CASE("dataset loading") {
    test::TempDir dir("dataset");
    std::mt19937_64 rng(8);
    save_pointcloud(test::random_f32_cloud(rng, 4), dir / "b.xyz", CloudFormat::XyzText);
    save_pointcloud(test::random_f32_cloud(rng, 4), dir / "a.bin", CloudFormat::F32Binary);
    save_pointcloud(test::random_f32_cloud(rng, 4), dir / "c.f32", CloudFormat::F32Binary);
    std::ofstream(dir / "notes.md") << "ignored";
    const auto ds = load_dataset(dir.path());
    REQUIRE(ds.size() == 3);
    CHECK(ds[0].id == "a");
    CHECK(ds[1].id == "b");
    CHECK(ds[2].id == "c");
    CHECK_THROWS(load_dataset(dir / "missing"));
}

TEST_CASE("report files") {
    test::TempDir dir("reports");
    const TransmissionReport rep{50, 2'708'329.123456789, 2'017'394'688ULL, 0.00123456789, 744'885.1, 21.2812, 3421, 3};

    SUBCASE("json roundtrip") {
        emit_report(rep, dir / "r.json", ReportFormat::Json);
        CHECK(read_report_json(dir / "r.json") == rep);
        CHECK(report_from_json(to_json(rep)) == rep);
    }
    SUBCASE("csv header and row") {
        emit_report(rep, dir / "r.csv", ReportFormat::Csv);
        std::ifstream in(dir / "r.csv");
        std::string header;
        std::string row;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(header == "n,total_time_ms,total_bits,mean_cd,edr_bps,rte,rounds,batch_size");
        CHECK(row.rfind("50,", 0) == 0);
        CHECK(row.find(",2017394688,") != std::string::npos);
        CHECK(row.substr(row.size() - 7) == ",3421,3");
    }
    SUBCASE("unwritable directory") {
        try {
            emit_report(rep, dir / "no" / "such" / "r.json", ReportFormat::Json);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("r.json") != std::string::npos);
        }
    }
    SUBCASE("format names") {
        CHECK(parse_report_format("csv") == ReportFormat::Csv);
        CHECK_THROWS_AS(parse_report_format("xml"), ArgumentError);
    }
}
