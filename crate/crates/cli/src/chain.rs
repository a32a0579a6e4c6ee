//! Option chain CSV: `tau,strike,rate,spot,mid,bid,ask`, `#` comments.

use std::io::Read;

use quadprice::calibration::{ChainOption, OptionChain};
use quadprice::model::MarketQuote;

pub const COLUMNS: [&str; 7] = ["tau", "strike", "rate", "spot", "mid", "bid", "ask"];

pub fn read_chain<R: Read>(input: R) -> Result<OptionChain, String> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| format!("header: {e}"))?.clone();
    if headers.is_empty() {
        return Err("chain file has no header row".into());
    }
    let mut idx = [0usize; 7];
    for (k, name) in COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| format!("missing column '{name}' (have: {})", headers.iter().collect::<Vec<_>>().join(",")))?;
    }
    let mut options = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format!("malformed row: {e}"))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 7];
        for (k, name) in COLUMNS.iter().enumerate() {
            let tok = rec.get(idx[k]).unwrap_or("");
            v[k] = tok
                .parse::<f64>()
                .map_err(|_| format!("line {line}, column '{name}': cannot parse '{tok}' as a number"))?;
        }
        let [tau, strike, rate, spot, mid, bid, ask] = v;
        if bid > ask {
            return Err(format!("line {line}: bid {bid} > ask {ask}"));
        }
        if !(mid > 0.0) {
            return Err(format!("line {line}: mid {mid} must be > 0"));
        }
        options.push(ChainOption { quote: MarketQuote::new(tau, strike, rate, spot).with_spread(bid, ask), mid });
        lines.push(line);
    }
    if options.is_empty() {
        return Err("chain file has no option rows".into());
    }
    OptionChain::new(options).map_err(|e| {
        use quadprice::calibration::CalibrationError as E;
        match e {
            E::BadSpread { index, .. } | E::BadPrice { index, .. } | E::Quote { index, .. } => {
                format!("line {}: {e}", lines[index])
            }
            e => e.to_string(),
        }
    })
}

pub fn write_chain<W: std::io::Write>(chain: &OptionChain, out: W) -> Result<(), String> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS).map_err(|e| e.to_string())?;
    for o in chain.options() {
        let q = &o.quote;
        let row = [q.tau, q.strike, q.rate, q.spot, o.mid, q.bid.unwrap_or(f64::NAN), q.ask.unwrap_or(f64::NAN)];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}
