#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ndvicast/regpcr.hpp"

namespace ndvicast {

using Json = nlohmann::ordered_json;

/// JSON text with two-space indent; floats carry 17 significant digits,
/// non-finite floats become null.
std::string dump_json(const Json& value);

Json to_json(const regpcr::RegPcrModel& model);
regpcr::RegPcrModel regpcr_from_json(const Json& doc);

void save_model(const std::filesystem::path& path, const regpcr::RegPcrModel& model);
regpcr::RegPcrModel load_model(const std::filesystem::path& path);

}  // namespace ndvicast
