#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <json.hpp>

#include "starq/device.hpp"

using namespace starq;
using nlohmann::json;

namespace {

Device preset() { return preset_device("paper-qpu"); }

Device mutate(const std::function<void(json&)>& f) {
  json j = json::parse(device_to_json(preset()));
  f(j);
  return parse_device(j.dump());
}

json& component(json& j, const std::string& id) {
  for (auto& c : j["components"])
    if (c["id"] == id) return c;
  throw std::runtime_error("no component " + id);
}

}  // namespace

TEST_SUITE("device") {
  TEST_CASE("preset matches the published table and validates") {
    Device d = preset();
    CHECK_NOTHROW(d.validate());
    CHECK(d.qubit_ids().size() == 6);
    const auto& cr = d.component(d.resonator_id());
    CHECK(*cr.T1_us == doctest::Approx(5.53));
    CHECK(*cr.T2_star_us == doctest::Approx(10.9));
    CHECK(d.component("QB1").frequency_GHz == doctest::Approx(4.67));
    CHECK(*d.component("QB1").T1_us == doctest::Approx(25.6));
    CHECK(d.duration("QB1").move_ns == 88);
    CHECK(d.duration("QB1").cz_ns == 96);
    CHECK(d.duration("QB4").cz_ns == 112);
    CHECK(d.coupler_of("QB3") == "TC3");
  }

  TEST_CASE("JSON round trip is lossless") {
    Device d = preset();
    Device back = parse_device(device_to_json(d));
    CHECK(back == d);
    auto path = std::filesystem::temp_directory_path() / "starq_device_rt.json";
    save_device(d, path.string());
    CHECK(load_device(path.string()) == d);
    CHECK(resolve_device(path.string()) == d);
    CHECK(resolve_device("preset:paper-qpu") == d);
    std::filesystem::remove(path);
  }

  TEST_CASE("schema violations are validation errors") {
    CHECK_THROWS_AS(parse_device("{not json"), ValidationError);
    CHECK_THROWS_AS(parse_device("{}"), ValidationError);
    CHECK_THROWS_AS(mutate([](json& j) { component(j, "QB1")["T1_us"] = -1.0; }).validate(), ValidationError);
    CHECK_THROWS_AS(mutate([](json& j) { component(j, "QB2")["anharmonicity_GHz"] = 0.1; }).validate(),
                    ValidationError);
    CHECK_THROWS_AS(mutate([](json& j) { component(j, "QB2")["T2_star_us"] = 500.0; }).validate(), ValidationError);
    CHECK_THROWS_AS(mutate([](json& j) { component(j, "QB2")["bogus_field"] = 1; }), ValidationError);
    CHECK_THROWS_AS(mutate([](json& j) { component(j, "QB2").erase("T1_us"); }).validate(), ValidationError);
    CHECK_THROWS_AS(mutate([](json& j) { j["durations"].erase("QB3"); }).validate(), ValidationError);
    CHECK_THROWS_AS(resolve_device("preset:unknown"), ValidationError);
    CHECK_THROWS_AS(load_device("/nonexistent/device.json"), ValidationError);
  }

  TEST_CASE("derived rates") {
    ComponentParams c;
    c.id = "x";
    c.frequency_GHz = 5.0;
    c.T1_us = 20.0;
    c.T2_star_us = 30.0;
    Rates r = derived_rates(c);
    CHECK(r.gamma1 == doctest::Approx(0.05));
    CHECK(r.gamma_phi == doctest::Approx(1.0 / 30.0 - 1.0 / 40.0));
    CHECK(r.n_th == 0.0);
    c.temperature_mK = 50.0;
    // Planck occupation evaluated directly: h f / (k T) with h/k = 0.0479924 K/GHz.
    double x = 0.04799243073366221 * 5.0 / 0.050;
    CHECK(derived_rates(c).n_th == doctest::Approx(1.0 / (std::exp(x) - 1.0)).epsilon(1e-9));
  }

  TEST_CASE("absolute couplings from beta") {
    Device d = preset();
    const CouplingParams* cp = d.find_coupling("QB1", "TC1");
    REQUIRE(cp != nullptr);
    double fq = d.component("QB1").frequency_GHz, fc = d.component("TC1").frequency_GHz;
    if (cp->beta && !cp->g_GHz) CHECK(d.coupling("QB1", "TC1") == doctest::Approx(*cp->beta * std::sqrt(fq * fc)));
    CHECK(d.coupling("QB1", "TC1", 4.0, 6.0) == doctest::Approx(d.coupling("TC1", "QB1", 6.0, 4.0)));
  }

  TEST_CASE("readout assignment") {
    Eigen::Matrix2d a = assignment_from_fidelity(0.98);
    CHECK(a.colwise().sum().isApprox(Eigen::RowVector2d(1, 1)));
    CHECK(a(1, 0) == doctest::Approx(0.02));
    CHECK_THROWS_AS(assignment_from_fidelity(1.2), ValidationError);
    Device d = preset();
    CHECK(d.assignment("QB1")(0, 0) == doctest::Approx(0.983));
  }
}
