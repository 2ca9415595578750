#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "layerspectra/certifier.hpp"
#include "layerspectra/eigsolve.hpp"

namespace layerspectra {

// Keys sorted, so dumps are canonical.
using Json = nlohmann::json;

// Non-finite doubles become the strings "inf", "-inf", "nan".
Json number(double x);
double number_from(const Json& j);

Json to_json(const MetricBounds& b);
Json to_json(const SelfIntersectionReport& r);
Json to_json(const FlatnessReport& r);
Json to_json(const AdmissibilityReport& r);
Json to_json(const EtaTable& t);
Json to_json(const KTotal& k);
Json to_json(const Lemma2Constants& c);
Json to_json(const Lemma2Diagnostics& d);
Json to_json(const ParabolicityReport& p);
Json to_json(const VolumeGrowthReport& v, std::size_t max_samples = 200);
Json to_json(const CertificateRow& row);
Json to_json(const PerturbationRow& row);
Json to_json(const BumpSpec& bump);
Json to_json(const Certificate& c);
Json to_json(const MeshLevel& level);
Json to_json(const ConvergenceStudy& s);
Json to_json(const BoundStateCount& b);

// Two-space indented dump with a trailing newline.
std::string dump(const Json& j);

std::string sha256_hex(std::string_view bytes);

// Write to a sibling temporary, then rename over the target.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace layerspectra
