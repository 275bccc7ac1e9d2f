#include "metalearn_cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace metalearn::cli {

namespace {

std::string trimmed(std::string s) {
    boost::algorithm::trim(s);
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trimmed(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_real(const std::string& path, const std::string& s) {
    double v = 0.0;
    const auto t = trimmed(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError("config key '" + path + "': expected a number, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& path, const std::string& s) {
    std::uint64_t v = 0;
    const auto t = trimmed(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError("config key '" + path + "': expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

}  // namespace

Config::Config(std::vector<ConfigKey> schema) : schema_(std::move(schema)) {
    for (const auto& k : schema_) values_[k.path] = k.value;
}

void Config::set(const std::string& path, const std::string& value) {
    auto it = values_.find(path);
    if (it == values_.end()) throw ConfigError("unknown config key '" + path + "'");
    it->second = trimmed(value);
}

void Config::set_all(const std::vector<std::pair<std::string, std::string>>& values) {
    for (const auto& [k, v] : values) set(k, v);
}

void Config::load_string(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config parse error at line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config key '" + section + "' must live inside a [section]");
        for (const auto& [key, node] : body) set(section + "." + key, node.data());
    }
}

void Config::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    load_string(buf.str());
}

const std::string& Config::text(const std::string& path) const {
    auto it = values_.find(path);
    if (it == values_.end()) throw ConfigError("internal: config key '" + path + "' missing from schema");
    return it->second;
}

double Config::real(const std::string& path) const { return parse_real(path, text(path)); }

std::size_t Config::count(const std::string& path) const { return static_cast<std::size_t>(parse_u64(path, text(path))); }

std::uint64_t Config::u64(const std::string& path) const { return parse_u64(path, text(path)); }

bool Config::flag(const std::string& path) const {
    const auto& v = text(path);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + path + "': expected true or false, got '" + v + "'");
}

std::vector<double> Config::reals(const std::string& path) const {
    std::vector<double> out;
    for (const auto& s : split_list(text(path))) out.push_back(parse_real(path, s));
    return out;
}

std::vector<std::size_t> Config::counts(const std::string& path) const {
    std::vector<std::size_t> out;
    for (const auto& s : split_list(text(path))) out.push_back(static_cast<std::size_t>(parse_u64(path, s)));
    return out;
}

std::vector<std::string> Config::words(const std::string& path) const { return split_list(text(path)); }

std::string Config::resolved() const {
    std::ostringstream out;
    std::string section;
    for (const auto& k : schema_) {
        const auto dot = k.path.find('.');
        const std::string s = k.path.substr(0, dot);
        if (s != section) {
            if (!section.empty()) out << '\n';
            out << '[' << s << "]\n";
            section = s;
        }
        if (!k.help.empty()) out << "; " << k.help << '\n';
        out << k.path.substr(dot + 1) << " = " << values_.at(k.path) << '\n';
    }
    return out.str();
}

}  // namespace metalearn::cli
