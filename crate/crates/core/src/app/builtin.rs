//! The four built-in benchmark applications.
//!
//! Function names and step scripts are encoding conventions: they follow the
//! function counts and interactions of each scenario, and compute steps are
//! scripted delays rather than business logic.

use std::collections::BTreeMap;

use super::{ApplicationSpec, BodyStep, FunctionSpec, TriggerKind, DEFAULT_STORE};
use crate::dist::Dist;
use crate::error::Error;

const NAMES: [&str; 4] = ["webshop", "smartcity", "smartfactory", "streaming"];

pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

pub fn load_builtin(name: &str) -> Result<ApplicationSpec, Error> {
    match name {
        "webshop" => Ok(webshop()),
        "smartcity" => Ok(smartcity()),
        "smartfactory" => Ok(smartfactory()),
        "streaming" => Ok(streaming()),
        other => Err(Error::UnknownBenchmark(other.to_string())),
    }
}

fn compute(median_ms: f64) -> BodyStep {
    BodyStep::Compute { time: Dist::lognormal(median_ms, 0.25) }
}

fn call(target: &str) -> BodyStep {
    BodyStep::Call { target: target.into(), payload_bytes: 512 }
}

fn publish(target: &str) -> BodyStep {
    BodyStep::Publish { target: target.into(), payload_bytes: 256 }
}

fn get(key: &str) -> BodyStep {
    BodyStep::DbGet { key: key.into(), service: DEFAULT_STORE.into() }
}

fn set(key: &str, size: u64) -> BodyStep {
    BodyStep::DbSet { key: key.into(), value_size: size, service: DEFAULT_STORE.into() }
}

fn ret(size: u64) -> BodyStep {
    BodyStep::Return { size }
}

fn par(branches: Vec<Vec<BodyStep>>) -> BodyStep {
    BodyStep::Parallel { branches }
}

fn http(name: &str, body: Vec<BodyStep>) -> FunctionSpec {
    FunctionSpec {
        name: name.into(),
        trigger: TriggerKind::HttpSync,
        entry_point: false,
        body,
        routes: BTreeMap::new(),
    }
}

fn entry(name: &str, body: Vec<BodyStep>) -> FunctionSpec {
    FunctionSpec { entry_point: true, ..http(name, body) }
}

fn event(name: &str, body: Vec<BodyStep>) -> FunctionSpec {
    FunctionSpec { trigger: TriggerKind::EventAsync, ..http(name, body) }
}

fn application(name: &str, description: &str, functions: Vec<FunctionSpec>) -> ApplicationSpec {
    ApplicationSpec {
        name: name.into(),
        description: description.into(),
        functions,
        external_services: vec![DEFAULT_STORE.into()],
    }
}

/// Microservice web shop: a single frontend routes customer requests to 16
/// backend functions; state lives in the keyed store.
fn webshop() -> ApplicationSpec {
    let routes: BTreeMap<String, Vec<BodyStep>> = [
        (
            "home",
            vec![
                compute(0.4),
                get("session"),
                par(vec![
                    vec![call("listProducts")],
                    vec![call("listRecommendations")],
                    vec![call("getAds")],
                    vec![call("supportedCurrencies")],
                ]),
                ret(8192),
            ],
        ),
        (
            "product",
            vec![
                compute(0.4),
                call("getProduct"),
                par(vec![vec![call("listRecommendations")], vec![call("getAds")]]),
                ret(4096),
            ],
        ),
        ("search", vec![compute(0.3), call("searchProducts"), ret(4096)]),
        ("addToCart", vec![compute(0.3), call("addCartItem"), call("getCart"), ret(1024)]),
        ("cart", vec![compute(0.3), call("getCart"), call("shipmentQuote"), ret(2048)]),
        ("checkout", vec![compute(0.5), call("checkout"), ret(1024)]),
        ("setCurrency", vec![compute(0.2), call("supportedCurrencies"), set("session", 64), ret(128)]),
        ("login", vec![compute(0.2), call("login"), ret(256)]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    let mut frontend = entry("frontend", vec![compute(0.3), ret(512)]);
    frontend.routes = routes;

    application(
        "webshop",
        "Web shop in 17 functions behind a single frontend, state in one keyed store.",
        vec![
            frontend,
            http("getCart", vec![compute(0.3), get("cart"), ret(1024)]),
            http("addCartItem", vec![compute(0.3), get("cart"), set("cart", 1024), ret(64)]),
            http("emptyCart", vec![compute(0.2), set("cart", 0), ret(64)]),
            http("listProducts", vec![compute(0.5), get("catalog"), ret(8192)]),
            http("getProduct", vec![compute(0.3), get("product"), ret(1024)]),
            http("searchProducts", vec![compute(0.6), get("catalog"), ret(4096)]),
            http("supportedCurrencies", vec![compute(0.2), ret(256)]),
            http("convert", vec![compute(0.3), get("rates"), ret(64)]),
            http(
                "checkout",
                vec![
                    compute(0.5),
                    call("getCart"),
                    par(vec![vec![call("convert")], vec![call("shipmentQuote")]]),
                    call("payment"),
                    call("shipOrder"),
                    call("email"),
                    call("emptyCart"),
                    set("order", 2048),
                    ret(512),
                ],
            ),
            http("payment", vec![compute(0.4), ret(128)]),
            http("shipmentQuote", vec![compute(0.3), ret(128)]),
            http("shipOrder", vec![compute(0.3), set("shipment", 512), ret(128)]),
            http("email", vec![compute(0.3), ret(64)]),
            http("listRecommendations", vec![compute(0.4), get("catalog"), ret(2048)]),
            http("getAds", vec![compute(0.2), ret(1024)]),
            http("login", vec![compute(0.4), get("user"), set("session", 256), ret(256)]),
        ],
    )
}

/// Smart traffic light: three sensor entry points feed filtering, object
/// recognition, movement planning and light-phase control.
fn smartcity() -> ApplicationSpec {
    application(
        "smartcity",
        "Smart traffic light in 9 functions with three sensor entry points.",
        vec![
            entry(
                "trafficSensorFilter",
                vec![compute(0.5), call("movementPlan"), publish("trafficStatistics"), ret(64)],
            ),
            entry(
                "objectRecognition",
                // stands in for image processing
                vec![compute(60.0), call("emergencyDetection"), call("movementPlan"), ret(64)],
            ),
            entry("weatherSensorFilter", vec![compute(0.5), call("roadCondition"), ret(64)]),
            http("movementPlan", vec![compute(2.0), set("movement", 512), call("calculateLightPhase"), ret(64)]),
            http("emergencyDetection", vec![compute(1.0), get("emergency"), ret(64)]),
            event("trafficStatistics", vec![compute(1.0), set("statistics", 256)]),
            http("roadCondition", vec![compute(0.5), set("road", 128), ret(64)]),
            http("calculateLightPhase", vec![compute(1.0), get("road"), get("light"), call("setLightPhase"), ret(64)]),
            http("setLightPhase", vec![compute(0.5), set("light", 64), ret(64)]),
        ],
    )
}

/// Event-driven couch factory: every inter-function interaction is an event.
fn smartfactory() -> ApplicationSpec {
    application(
        "smartfactory",
        "Smart factory in 7 functions connected only by asynchronous event pipelines.",
        vec![
            entry(
                "orderSupplies",
                vec![
                    compute(1.0),
                    set("order", 512),
                    publish("orderPanel"),
                    publish("orderPanel"),
                    publish("orderCushion"),
                    publish("orderCushion"),
                    ret(128),
                ],
            ),
            event("orderPanel", vec![compute(1.0), publish("producePanel")]),
            event("orderCushion", vec![compute(1.0), publish("produceCushion")]),
            event("producePanel", vec![compute(20.0), publish("billing")]),
            event("produceCushion", vec![compute(15.0), publish("billing")]),
            event("billing", vec![compute(1.0), set("ledger", 256), publish("payment")]),
            event("payment", vec![compute(1.0), get("ledger"), set("invoice", 512)]),
        ],
    )
}

/// Streaming service backend: devices call each function directly.
fn streaming() -> ApplicationSpec {
    application(
        "streaming",
        "Video streaming backend in 7 functions called directly by devices.",
        vec![
            entry("registerUser", vec![compute(1.0), set("user", 256), ret(64)]),
            entry("registerDevice", vec![compute(1.0), set("device", 256), ret(64)]),
            entry("authenticate", vec![compute(1.0), get("user"), ret(128)]),
            entry("addVideo", vec![compute(1.0), set("video", 1024), ret(64)]),
            entry("requestVideo", vec![compute(1.0), get("video"), ret(4096)]),
            entry("updateMetadata", vec![compute(1.0), set("metadata", 256), ret(64)]),
            entry("getMetadata", vec![compute(1.0), get("metadata"), ret(256)]),
        ],
    )
}
