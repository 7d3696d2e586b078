#include "lps/core/config.hpp"

#include <fstream>
#include <sstream>

#include "lps/core/check.hpp"
#include "lps/core/fs_util.hpp"
#include "lps/core/hash.hpp"

namespace lps {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  LPS_CHECK(in.good(), "cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    LPS_CHECK(eq != std::string::npos,
              "config line " + std::to_string(lineno) + " has no '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    LPS_CHECK(!key.empty(), "config line " + std::to_string(lineno) + " has empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }
void Config::set(const std::string& key, int64_t value) { values_[key] = std::to_string(value); }
void Config::set(const std::string& key, double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  values_[key] = os.str();
}
void Config::set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

std::string Config::str(const std::string& key) const {
  auto it = values_.find(key);
  LPS_CHECK(it != values_.end(), "missing config key: " + key);
  return it->second;
}
std::string Config::str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int64_t Config::integer(const std::string& key) const {
  const std::string v = str(key);
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    LPS_CHECK(pos == v.size(), "trailing junk in integer config value '" + v + "' for " + key);
    return r;
  } catch (const std::invalid_argument&) {
    LPS_FAIL("config key " + key + " is not an integer: " + v);
  }
}
int64_t Config::integer(const std::string& key, int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

double Config::real(const std::string& key) const {
  const std::string v = str(key);
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    LPS_CHECK(pos == v.size(), "trailing junk in real config value '" + v + "' for " + key);
    return r;
  } catch (const std::invalid_argument&) {
    LPS_FAIL("config key " + key + " is not a real number: " + v);
  }
}
double Config::real(const std::string& key, double fallback) const {
  return has(key) ? real(key) : fallback;
}

bool Config::boolean(const std::string& key) const {
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  LPS_FAIL("config key " + key + " is not a boolean: " + v);
}
bool Config::boolean(const std::string& key, bool fallback) const {
  return has(key) ? boolean(key) : fallback;
}

std::vector<int64_t> Config::int_list(const std::string& key) const {
  std::vector<int64_t> out;
  for (const auto& tok : split_commas(str(key))) out.push_back(std::stoll(tok));
  return out;
}
std::vector<int64_t> Config::int_list(const std::string& key,
                                      const std::vector<int64_t>& fallback) const {
  return has(key) ? int_list(key) : fallback;
}

std::vector<double> Config::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : split_commas(str(key))) out.push_back(std::stod(tok));
  return out;
}

std::vector<std::string> Config::str_list(const std::string& key) const {
  return split_commas(str(key));
}
std::vector<std::string> Config::str_list(const std::string& key,
                                          const std::vector<std::string>& fallback) const {
  return has(key) ? str_list(key) : fallback;
}

void Config::merge_from(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

Config Config::section(const std::string& prefix) const {
  Config out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : values_) {
    if (k.rfind(p, 0) == 0) out.values_[k.substr(p.size())] = v;
  }
  return out;
}

std::string Config::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

uint64_t Config::hash() const { return fnv1a64(canonical()); }
std::string Config::hash_hex() const { return hex64(hash()); }

void Config::save(const std::filesystem::path& path) const {
  atomic_write_text(path, canonical());
}

}  // namespace lps
