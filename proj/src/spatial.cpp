#include "chaingen/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "chaingen/error.hpp"

namespace chaingen::spatial {

using nlohmann::json;

std::string PoiRecord::descriptor() const {
    std::string out = name;
    out += ' ';
    out += to_string(category);
    if (!label.empty() && label != to_string(category)) {
        out += ' ';
        out += label;
    }
    for (const auto& t : tags) {
        out += ' ';
        out += t;
    }
    return out;
}

bool PoiRecord::open_during(int start_min, int end_min) const noexcept {
    if (always_open()) return true;
    if (start_min >= 1440) {
        start_min -= 1440;
        end_min -= 1440;
    }
    return open_min <= start_min && end_min <= close_min;
}

void validate(const PoiRecord& poi) {
    check_coordinate(poi.location);
    if (poi.id.empty()) throw Error(Errc::invalid_entry, "POI id must be nonempty");
    if (poi.open_min < 0 || poi.close_min <= poi.open_min || poi.close_min > 2880) {
        throw Error(Errc::invalid_entry, "POI '" + poi.id + "' has an invalid opening window");
    }
    if (poi.rating < 0.0 || poi.rating > 5.0) throw Error(Errc::invalid_entry, "POI '" + poi.id + "' rating outside [0,5]");
}

json point_to_json(const GeoPoint& p) { return {{"lon", p.lon}, {"lat", p.lat}}; }

GeoPoint point_from_json(const json& j) {
    GeoPoint p{j.at("lon").get<double>(), j.at("lat").get<double>()};
    check_coordinate(p);
    return p;
}

json to_json(const PoiRecord& p) {
    return {{"id", p.id},
            {"name", p.name},
            {"category", to_string(p.category)},
            {"label", p.label},
            {"lon", p.location.lon},
            {"lat", p.location.lat},
            {"open_min", p.open_min},
            {"close_min", p.close_min},
            {"rating", p.rating},
            {"price", p.price},
            {"tags", p.tags}};
}

PoiRecord poi_from_json(const json& j) {
    PoiRecord p;
    p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    p.name = j.value("name", "");
    p.label = j.at("category").get<std::string>();
    p.category = parse_category(p.label);
    p.location = {j.at("lon").get<double>(), j.at("lat").get<double>()};
    p.open_min = j.value("open_min", 0);
    p.close_min = j.value("close_min", 1440);
    p.rating = j.value("rating", 0.0);
    p.price = j.value("price", 0);
    if (j.contains("tags")) {
        const auto& t = j.at("tags");
        if (t.is_array()) {
            p.tags = t.get<std::vector<std::string>>();
        } else if (t.is_string()) {
            std::stringstream ss(t.get<std::string>());
            for (std::string tag; std::getline(ss, tag, ';');) {
                if (!tag.empty()) p.tags.push_back(tag);
            }
        }
    }
    validate(p);
    return p;
}

PoiDataset::PoiDataset(std::vector<PoiRecord> pois, double cell_deg) : pois_(std::move(pois)), cell_deg_(cell_deg) {
    embeddings_.reserve(pois_.size());
    for (std::size_t i = 0; i < pois_.size(); ++i) {
        const auto& p = pois_[i];
        validate(p);
        if (!by_id_.emplace(p.id, i).second) throw Error(Errc::invalid_entry, "duplicate POI id '" + p.id + "'");
        embeddings_.push_back(text::embed(p.descriptor()));
        const long cx = static_cast<long>(std::floor(p.location.lon / cell_deg_));
        const long cy = static_cast<long>(std::floor(p.location.lat / cell_deg_));
        grid_[cell_key(cx, cy)].push_back(i);
    }
}

std::optional<std::size_t> PoiDataset::find(const std::string& id) const {
    if (auto it = by_id_.find(id); it != by_id_.end()) return it->second;
    return std::nullopt;
}

const PoiRecord& PoiDataset::by_id(const std::string& id) const {
    if (auto i = find(id)) return pois_[*i];
    throw Error(Errc::invalid_entry, "unknown POI '" + id + "'");
}

std::vector<std::size_t> PoiDataset::range_query(const GeoPoint& origin, double radius_m) const {
    check_coordinate(origin);
    std::vector<std::size_t> out;
    if (radius_m < 0.0) return out;
    auto accept = [&](std::size_t i) {
        if (haversine_distance(origin, pois_[i].location) <= radius_m) out.push_back(i);
    };

    const double deg_per_m = 180.0 / (std::numbers::pi * kEarthRadiusM);
    const double dlat = radius_m * deg_per_m * 1.001 + 1e-9;
    const double max_abs_lat = std::min(90.0, std::abs(origin.lat) + dlat);
    const double coslat = std::cos(max_abs_lat * std::numbers::pi / 180.0);
    const double dlon = coslat > 1e-6 ? dlat / coslat : 360.0;
    const double cells = (2 * dlon / cell_deg_ + 1) * (2 * dlat / cell_deg_ + 1);
    if (dlon >= 180.0 || cells > static_cast<double>(pois_.size()) + 16.0) {
        for (std::size_t i = 0; i < pois_.size(); ++i) accept(i);
        return out;
    }
    const long x0 = static_cast<long>(std::floor((origin.lon - dlon) / cell_deg_));
    const long x1 = static_cast<long>(std::floor((origin.lon + dlon) / cell_deg_));
    const long y0 = static_cast<long>(std::floor((origin.lat - dlat) / cell_deg_));
    const long y1 = static_cast<long>(std::floor((origin.lat + dlat) / cell_deg_));
    for (long cx = x0; cx <= x1; ++cx) {
        for (long cy = y0; cy <= y1; ++cy) {
            auto it = grid_.find(cell_key(cx, cy));
            if (it == grid_.end()) continue;
            for (std::size_t i : it->second) accept(i);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void validate(const ScoreWeights& w) {
    if (w.semantic < 0 || w.preference < 0 || w.distance < 0 ||
        std::abs(w.semantic + w.preference + w.distance - 1.0) > 1e-9) {
        throw Error(Errc::invalid_weights, "score weights must be nonnegative and sum to 1");
    }
    if (w.semantic_threshold < 0.0 || w.semantic_threshold > 1.0) {
        throw Error(Errc::invalid_weights, "semantic threshold must lie in [0,1]");
    }
}

double preference_score(const PoiRecord& poi, const Preferences& prefs) {
    const double w = std::clamp(prefs.weight(poi.category), 0.0, 1.0);
    return 0.7 * w + 0.3 * std::clamp(poi.rating / 5.0, 0.0, 1.0);
}

double distance_decay(double distance_m, double radius_m) {
    if (distance_m <= 0.0) return 1.0;
    if (radius_m <= 0.0) return 0.0;
    return std::exp(-distance_m / (radius_m / 3.0));
}

std::vector<ScoredPoi> poi_search(const PoiDataset& data, const PoiQuery& query, const ScoreWeights& weights,
                                  const Preferences& prefs) {
    if (data.empty()) throw Error(Errc::empty_dataset, "no POIs loaded");
    validate(weights);
    if (query.radius_m < 0.0) throw Error(Errc::invalid_entry, "radius must be nonnegative");
    const auto q = text::embed(query.text);
    std::vector<ScoredPoi> scored;
    for (std::size_t i : data.range_query(query.origin, query.radius_m)) {
        const auto& poi = data.at(i);
        if (query.category && poi.category != *query.category) continue;
        ScoredPoi s;
        s.index = i;
        s.id = poi.id;
        s.distance_m = haversine_distance(query.origin, poi.location);
        s.semantic = text::cosine(q, data.embedding(i));
        s.preference = preference_score(poi, prefs);
        s.decay = distance_decay(s.distance_m, query.radius_m);
        s.score = weights.semantic * s.semantic + weights.preference * s.preference + weights.distance * s.decay;
        scored.push_back(std::move(s));
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredPoi& a, const ScoredPoi& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (scored.size() > query.k) scored.resize(query.k);
    return scored;
}

std::vector<SemanticMatch> semantic_match(const PoiDataset& data, const std::string& query_text,
                                          const GeoPoint& origin, double radius_m, double threshold) {
    const auto q = text::embed(query_text);
    std::vector<SemanticMatch> out;
    for (std::size_t i : data.range_query(origin, radius_m)) {
        const double sim = text::cosine(q, data.embedding(i));
        if (sim >= threshold) out.push_back({i, data.at(i).id, sim});
    }
    std::sort(out.begin(), out.end(), [](const SemanticMatch& a, const SemanticMatch& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    });
    return out;
}

// --- ingestion ---

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    std::size_t column(const std::string& name, bool required = true) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        if (required) throw Error(Errc::parse_error, "missing CSV column '" + name + "'");
        return header.size();
    }
};

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw Error(Errc::parse_error, "line " + std::to_string(n) + ": expected " +
                                               std::to_string(t.header.size()) + " fields");
        }
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(n);
    }
    return t;
}

double to_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(Errc::parse_error, "line " + std::to_string(line) + ": not a number '" + s + "'");
    }
}

}  // namespace

std::vector<PoiRecord> parse_pois_csv(const std::string& text) {
    const CsvTable t = parse_csv(text);
    const std::size_t c_id = t.column("id"), c_name = t.column("name"), c_cat = t.column("category"),
                      c_lon = t.column("lon"), c_lat = t.column("lat"), c_open = t.column("open_min"),
                      c_close = t.column("close_min"), c_rating = t.column("rating"), c_price = t.column("price"),
                      c_tags = t.column("tags", false);
    std::vector<PoiRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t ln = t.line_numbers[r];
        PoiRecord p;
        p.id = row[c_id];
        p.name = row[c_name];
        p.label = row[c_cat];
        p.category = parse_category(p.label);
        p.location = {to_double(row[c_lon], ln), to_double(row[c_lat], ln)};
        p.open_min = static_cast<int>(to_double(row[c_open], ln));
        p.close_min = static_cast<int>(to_double(row[c_close], ln));
        p.rating = to_double(row[c_rating], ln);
        p.price = static_cast<int>(to_double(row[c_price], ln));
        if (c_tags < row.size()) {
            std::stringstream ss(row[c_tags]);
            for (std::string tag; std::getline(ss, tag, ';');) {
                if (!tag.empty()) p.tags.push_back(tag);
            }
        }
        validate(p);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<PoiRecord> load_pois_csv(const std::filesystem::path& path) { return parse_pois_csv(read_file(path)); }

std::vector<PoiRecord> parse_pois_geojson(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::parse_error, e.what(), e.byte);
    }
    if (doc.value("type", "") != "FeatureCollection") throw Error(Errc::parse_error, "expected a FeatureCollection");
    std::vector<PoiRecord> out;
    try {
        for (const auto& f : doc.at("features")) {
            const auto& geom = f.at("geometry");
            if (geom.value("type", "") != "Point") throw Error(Errc::parse_error, "only Point features are supported");
            json props = f.value("properties", json::object());
            props["lon"] = geom.at("coordinates").at(0);
            props["lat"] = geom.at("coordinates").at(1);
            if (!props.contains("id") && f.contains("id")) props["id"] = f.at("id");
            out.push_back(poi_from_json(props));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::parse_error, std::string("GeoJSON feature: ") + e.what());
    }
    return out;
}

std::vector<PoiRecord> load_pois_geojson(const std::filesystem::path& path) {
    return parse_pois_geojson(read_file(path));
}

RoadNetwork parse_network_csv(const std::string& text) {
    const CsvTable t = parse_csv(text);
    const std::size_t c_from = t.column("from"), c_flon = t.column("from_lon"), c_flat = t.column("from_lat"),
                      c_to = t.column("to"), c_tlon = t.column("to_lon"), c_tlat = t.column("to_lat"),
                      c_len = t.column("length_m"), c_walk = t.column("walk_kmh"), c_transit = t.column("transit_kmh"),
                      c_drive = t.column("drive_kmh"), c_cycle = t.column("cycle_kmh"),
                      c_weight = t.column("demand_weight", false), c_oneway = t.column("oneway", false);
    RoadNetwork net;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t ln = t.line_numbers[r];
        net.add_node(row[c_from], {to_double(row[c_flon], ln), to_double(row[c_flat], ln)});
        net.add_node(row[c_to], {to_double(row[c_tlon], ln), to_double(row[c_tlat], ln)});
        std::array<double, 4> speeds{};
        speeds[static_cast<std::size_t>(TravelMode::walk)] = to_double(row[c_walk], ln);
        speeds[static_cast<std::size_t>(TravelMode::transit)] = to_double(row[c_transit], ln);
        speeds[static_cast<std::size_t>(TravelMode::drive)] = to_double(row[c_drive], ln);
        speeds[static_cast<std::size_t>(TravelMode::cycle)] = to_double(row[c_cycle], ln);
        const double len = row[c_len].empty() ? 0.0 : to_double(row[c_len], ln);
        const double weight = c_weight < row.size() && !row[c_weight].empty() ? to_double(row[c_weight], ln) : 1.0;
        const bool oneway = c_oneway < row.size() && (row[c_oneway] == "1" || row[c_oneway] == "true");
        net.add_edge(row[c_from], row[c_to], len, speeds, oneway, weight);
    }
    return net;
}

RoadNetwork load_network_csv(const std::filesystem::path& path) { return parse_network_csv(read_file(path)); }

// --- tool service ---

std::vector<TravelMode> modes_from_json(const json& j) {
    std::vector<TravelMode> modes;
    if (j.is_null()) return {TravelMode::walk, TravelMode::transit};
    for (const auto& m : j) modes.push_back(parse_mode(m.get<std::string>()));
    return modes;
}

namespace {

Preferences preferences_from_json(const json& j) {
    Preferences p;
    if (!j.is_object()) return p;
    for (const auto& [key, value] : j.items()) {
        p.category[static_cast<std::size_t>(parse_category(key))] = value.get<double>();
    }
    return p;
}

json traffic_to_json(const RoadNetwork& net, const TrafficPrediction& pred) {
    json snaps = json::array();
    for (const auto& s : pred.snapshots) {
        json segs = json::array();
        for (const auto& seg : s.segments) {
            const auto& e = net.edges()[seg.edge];
            segs.push_back({{"edge", seg.edge},
                            {"from", net.node(e.from).id},
                            {"to", net.node(e.to).id},
                            {"density", seg.density},
                            {"speed_kmh", seg.speed_kmh}});
        }
        snaps.push_back({{"t_min", s.t_min}, {"segments", segs}});
    }
    json paths = json::array();
    for (const auto& p : pred.paths) {
        paths.push_back({{"t_min", p.t_min},
                         {"origin", net.node(p.origin).id},
                         {"destination", net.node(p.destination).id},
                         {"reachable", p.reachable},
                         {"nodes", p.nodes},
                         {"duration_min", p.duration_min}});
    }
    return {{"snapshots", snaps}, {"paths", paths}};
}

}  // namespace

json SpatialService::query(const json& payload, const json& /*ctx*/) {
    const std::string op = payload.value("op", "");
    const SpatialWorld& w = *world_;
    try {
        if (op == "poi_search") {
            PoiQuery q;
            q.origin = point_from_json(payload.at("origin"));
            q.text = payload.value("text", "");
            q.radius_m = payload.value("radius_m", 1000.0);
            q.k = payload.value("k", std::size_t{10});
            if (payload.contains("category")) q.category = parse_category(payload.at("category").get<std::string>());
            ScoreWeights sw = w.score_weights;
            if (payload.contains("weights")) {
                const auto& jw = payload.at("weights");
                sw.semantic = jw.value("semantic", sw.semantic);
                sw.preference = jw.value("preference", sw.preference);
                sw.distance = jw.value("distance", sw.distance);
            }
            const auto results =
                poi_search(w.pois, q, sw, preferences_from_json(payload.value("preferences", json::object())));
            json arr = json::array();
            for (const auto& r : results) {
                const auto& poi = w.pois.at(r.index);
                arr.push_back({{"id", r.id},
                               {"name", poi.name},
                               {"category", to_string(poi.category)},
                               {"label", poi.label},
                               {"location", point_to_json(poi.location)},
                               {"distance_m", r.distance_m},
                               {"semantic", r.semantic},
                               {"preference", r.preference},
                               {"decay", r.decay},
                               {"score", r.score},
                               {"open_min", poi.open_min},
                               {"close_min", poi.close_min},
                               {"rating", poi.rating}});
            }
            return {{"results", arr}};
        }
        if (op == "route_plan") {
            const auto modes = modes_from_json(payload.value("modes", json(nullptr)));
            const auto route = route_plan(w.network, w.network.node_index(payload.at("origin").get<std::string>()),
                                          w.network.node_index(payload.at("destination").get<std::string>()), modes,
                                          w.cost_weights);
            return to_json(route);
        }
        if (op == "travel") {
            const auto route = travel_between(w.network, point_from_json(payload.at("from")),
                                              point_from_json(payload.at("to")),
                                              modes_from_json(payload.value("modes", json(nullptr))), w.cost_weights);
            return to_json(route);
        }
        if (op == "traffic_predict") {
            DemandProfile demand;
            for (const auto& s : payload.value("demand", json::array())) {
                demand.steps.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
            }
            std::sort(demand.steps.begin(), demand.steps.end());
            for (const auto& e : payload.value("events", json::array())) {
                demand.events.push_back({e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()});
            }
            std::vector<std::pair<std::size_t, std::size_t>> od;
            for (const auto& p : payload.value("od", json::array())) {
                od.emplace_back(w.network.node_index(p.at(0).get<std::string>()),
                                w.network.node_index(p.at(1).get<std::string>()));
            }
            BoundingBox area;
            if (payload.contains("area")) {
                const auto& a = payload.at("area");
                area = {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>(), a.at(3).get<double>()};
            }
            const auto pred = traffic_predict(w.network, area, payload.value("start_min", 0.0),
                                              payload.value("horizon_min", 60.0), payload.value("dt_min", 15.0),
                                              demand, od);
            return traffic_to_json(w.network, pred);
        }
        if (op == "semantic_match") {
            const auto matches = semantic_match(w.pois, payload.value("text", ""), point_from_json(payload.at("origin")),
                                                payload.value("radius_m", 1000.0),
                                                payload.value("threshold", w.score_weights.semantic_threshold));
            json arr = json::array();
            for (const auto& m : matches) arr.push_back({{"id", m.id}, {"similarity", m.similarity}});
            return {{"matches", arr}};
        }
        if (op == "poi") {
            return to_json(w.pois.by_id(payload.at("id").get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("spatial payload: ") + e.what());
    }
    throw Error(Errc::unsupported_operation, "spatial has no op '" + op + "'");
}

}  // namespace chaingen::spatial
