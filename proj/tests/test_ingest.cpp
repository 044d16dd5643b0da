#include <doctest.h>

#include <sstream>

#include "heat/aggregation_key.hpp"
#include "heat/alert.hpp"
#include "heat/error.hpp"
#include "heat/timestamp.hpp"
#include "heat/vocabulary.hpp"

using namespace heat;

namespace {

IngestResult parse(const std::string& text) {
  const auto vocab = default_vocabulary();
  std::istringstream in(text);
  return parse_eve_stream(in, default_mapping(vocab), vocab);
}

const char* kScanLine =
    R"({"timestamp":"2021-11-05T14:23:11.123456+0000","event_type":"alert","src_ip":"10.0.0.5","dest_ip":"10.0.0.9",)"
    R"("dest_port":22,"alert":{"signature_id":2001219,"signature":"ET SCAN Potential SSH Scan",)"
    R"("category":"Attempted Information Leak","severity":2}})";

}  // namespace

TEST_CASE("default vocabulary has eight stages plus unmapped") {
  const auto vocab = default_vocabulary();
  CHECK(vocab.size() == 9);
  CHECK(vocab.contains("unmapped"));
  CHECK(vocab.require_index("discovery") == 0);
  CHECK_THROWS_AS(vocab.require_index("nope"), Error);
}

TEST_CASE("vocabulary validation") {
  CHECK_THROWS_AS(StageVocabulary(std::vector<StageInfo>{}), Error);
  CHECK_THROWS_AS(StageVocabulary({{"a", "A", 60.0}}), Error);  // no unmapped
  CHECK_THROWS_AS(StageVocabulary({{"a", "A", 60.0}, {"a", "A", 60.0}, {"unmapped", "U", 60.0}}), Error);
  CHECK_THROWS_AS(StageVocabulary({{"a", "A", 0.0}, {"unmapped", "U", 60.0}}), Error);
  const auto vocab = default_vocabulary();
  const auto back = StageVocabulary::from_json(vocab.to_json());
  CHECK(back == vocab);
  CHECK(back.fingerprint() == vocab.fingerprint());
  const StageVocabulary other({{"x", "X", 60.0}, {"unmapped", "U", 60.0}});
  CHECK(other.fingerprint() != vocab.fingerprint());
}

TEST_CASE("stage mapping: first matching rule wins, otherwise unmapped") {
  const auto vocab = default_vocabulary();
  const auto mapping = default_mapping(vocab);
  CHECK(map_signature("ET SCAN Nmap", 1, "Misc activity", mapping) == "discovery");
  CHECK(map_signature("anything", 1, "Web Application Attack", mapping) == "exploitation");
  CHECK(map_signature("anything", 1, "Not in the table", mapping) == "unmapped");

  const auto custom = StageMapping::from_json(
      nlohmann::json::parse(R"([{"match":{"kind":"signature_id","value":42},"stage":"exfiltration"},
                               {"match":{"kind":"signature","value":"exact"},"stage":"benign"}])"),
      vocab);
  CHECK(map_signature("x", 42, "c", custom) == "exfiltration");
  CHECK(map_signature("exact", 1, "c", custom) == "benign");
  CHECK(map_signature("exactly", 1, "c", custom) == "unmapped");
  CHECK(StageMapping::from_json(custom.to_json(), vocab).to_json() == custom.to_json());

  CHECK_THROWS_AS(StageMapping::from_json(nlohmann::json::parse(
                                              R"([{"match":{"kind":"category","value":"c"},"stage":"nope"}])"),
                                          vocab),
                  Error);
  CHECK_THROWS_AS(StageMapping::from_json(nlohmann::json::parse(
                                              R"([{"match":{"kind":"regex","value":"c"},"stage":"benign"}])"),
                                          vocab),
                  Error);
}

TEST_CASE("EVE parsing keeps alerts and counts what it skips") {
  std::string text = std::string(kScanLine) + "\n" +
                     R"({"timestamp":"2021-11-05T14:23:12Z","event_type":"flow","src_ip":"1.1.1.1"})" + "\n" +
                     "not json at all\n" + R"({"event_type":"alert","src_ip":"1.1.1.1"})" + "\n\n" +
                     std::string(kScanLine) + "\r\n";
  const auto r = parse(text);
  CHECK(r.stats.lines == 5);
  CHECK(r.stats.alerts == 2);
  CHECK(r.stats.skipped_non_alert == 1);
  CHECK(r.stats.skipped_malformed == 2);
  REQUIRE(r.alerts.size() == 2);
  const auto& a = r.alerts[0];
  CHECK(a.id == "L1");
  CHECK(a.src_ip == "10.0.0.5");
  CHECK(a.dst_port == 22);
  CHECK(a.stage == "discovery");
  CHECK(a.timestamp == doctest::Approx(1636122191.123456).epsilon(1e-15));
  CHECK(r.alerts[1].id == "L6");
}

TEST_CASE("duplicate alert ids are renamed, not dropped") {
  nlohmann::json j = nlohmann::json::parse(kScanLine);
  j["alert_id"] = "dup";
  const auto line = j.dump();
  const auto r = parse(line + "\n" + line + "\n");
  REQUIRE(r.alerts.size() == 2);
  CHECK(r.alerts[0].id == "dup");
  CHECK(r.alerts[1].id == "dup~L2");
  CHECK(r.stats.renamed_duplicate_ids == 1);
}

TEST_CASE("EVE lines round-trip through to_eve_line") {
  const auto first = parse(kScanLine).alerts.at(0);
  const auto again = parse(to_eve_line(first)).alerts.at(0);
  CHECK(again == first);
}

TEST_CASE("unreadable stream is a data error") {
  std::istringstream in("x");
  in.setstate(std::ios::badbit);
  const auto vocab = default_vocabulary();
  try {
    parse_eve_stream(in, default_mapping(vocab), vocab);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
  }
}

TEST_CASE("timestamps") {
  CHECK(parse_timestamp("2021-11-05T14:23:11.123456+0000").value() == doctest::Approx(1636122191.123456));
  CHECK(parse_timestamp("2021-11-05T14:23:11Z").value() == 1636122191.0);
  CHECK(parse_timestamp("2021-11-05T15:23:11+01:00").value() == 1636122191.0);
  CHECK(parse_timestamp("1636122191.5").value() == 1636122191.5);
  CHECK_FALSE(parse_timestamp("yesterday"));
  CHECK_FALSE(parse_timestamp("2021-13-05T14:23:11Z"));
  CHECK(format_timestamp(1636122191.5) == "2021-11-05T14:23:11.500000+0000");
  for (double t : {0.0, 1.000001, 1636122191.123456, 1767225600.999999, 1767225600.0000004}) {
    const double q = quantize_timestamp(t);
    CHECK(parse_timestamp(format_timestamp(q)).value() == q);
    CHECK(std::abs(q - t) <= 5e-7 * (1 + 1e-9) + 1e-9);
  }
}

TEST_CASE("ASN table uses the longest matching prefix") {
  std::istringstream csv("cidr,asn\n10.0.0.0/8,100\n10.1.0.0/16,200\n10.1.2.3/32,300\n2001:db8::/32,400\n");
  const auto table = AsnTable::from_csv(csv);
  CHECK(table.size() == 4);
  CHECK(table.lookup("10.9.9.9") == 100u);
  CHECK(table.lookup("10.1.9.9") == 200u);
  CHECK(table.lookup("10.1.2.3") == 300u);
  CHECK(table.lookup("2001:db8::1") == 400u);
  CHECK_FALSE(table.lookup("192.168.0.1"));
  CHECK_FALSE(table.lookup("garbage"));

  AsnTable bad;
  CHECK_THROWS_AS(bad.add("10.0.0.0/33", 1), Error);
  CHECK_THROWS_AS(bad.add("nonsense", 1), Error);
}

TEST_CASE("aggregation keys") {
  std::istringstream csv("10.0.0.0/8,64500\n");
  const auto table = AsnTable::from_csv(csv);
  Alert a;
  a.src_ip = "10.2.3.4";
  CHECK(resolve_aggregation_key(a, KeyMode::per_source_ip, nullptr) == "10.2.3.4");
  CHECK(resolve_aggregation_key(a, KeyMode::per_source_asn, &table) == "AS64500");
  a.src_ip = "8.8.8.8";
  CHECK(resolve_aggregation_key(a, KeyMode::per_source_asn, &table) == kUnknownAsnKey);
  CHECK(parse_key_mode("asn") == KeyMode::per_source_asn);
  CHECK_THROWS_AS(parse_key_mode("subnet"), Error);
}
