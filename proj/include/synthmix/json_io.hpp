#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace synthmix::jsonio {

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

const std::string& require_string(const nlohmann::json& obj, const char* key, const std::string& where);
const nlohmann::json& require_array(const nlohmann::json& obj, const char* key, const std::string& where);

nlohmann::json parse_or_throw(std::string_view text, const std::string& what);

} // namespace synthmix::jsonio
