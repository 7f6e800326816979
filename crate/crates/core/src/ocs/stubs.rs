use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Fixtures, PaperRecord, UserRecord};
use crate::interp::{ActivityCall, ActivityError, ActivityRegistry, Outcome, RegistryError};
use crate::runtime::Value;

fn user<'f>(f: &'f Fixtures, id: &str) -> Result<&'f UserRecord, ActivityError> {
    f.users.get(id).ok_or_else(|| ActivityError::new(format!("no user `{id}` in fixtures")))
}

fn paper<'f>(f: &'f Fixtures, id: &str) -> Result<&'f PaperRecord, ActivityError> {
    f.papers.get(id).ok_or_else(|| ActivityError::new(format!("no paper `{id}` in fixtures")))
}

fn yes_no(b: bool) -> Outcome {
    Outcome::branch(if b { "yes" } else { "no" })
}

/// A check over one paper's fixture record.
fn paper_check(
    r: &mut ActivityRegistry,
    f: &Arc<Fixtures>,
    id: &str,
    test: impl Fn(&Fixtures, &PaperRecord) -> bool + Send + Sync + 'static,
) -> Result<(), RegistryError> {
    let f = f.clone();
    r.register(id, move |c: &mut ActivityCall<'_>| {
        let p = paper(&f, &c.input_id(0)?)?;
        Ok(yes_no(test(&f, p)))
    })
}

/// A check that yields a derived document on `yes`.
fn paper_producer(
    r: &mut ActivityRegistry,
    f: &Arc<Fixtures>,
    id: &str,
    doc_type: &'static str,
    test: impl Fn(&PaperRecord) -> bool + Send + Sync + 'static,
) -> Result<(), RegistryError> {
    let f = f.clone();
    r.register(id, move |c: &mut ActivityCall<'_>| {
        let pid = c.input_id(0)?;
        if test(paper(&f, &pid)?) {
            Ok(Outcome::with("yes", vec![Value::domain_ref(doc_type, format!("{pid}.{}", doc_type.to_lowercase()))]))
        } else {
            Ok(Outcome::branch("no"))
        }
    })
}

fn any_author(f: &Fixtures, p: &PaperRecord, test: impl Fn(&UserRecord) -> bool) -> bool {
    p.authors.iter().filter_map(|a| f.users.get(a)).any(test)
}

/// Registers a deterministic implementation for every activity of the
/// example library, reading `fixtures`.
pub fn register_stub_activities(r: &mut ActivityRegistry, fixtures: Fixtures) -> Result<(), RegistryError> {
    let f = Arc::new(fixtures);

    r.register("fill registration info", |c: &mut ActivityCall<'_>| {
        Ok(Outcome::with("ok", vec![Value::domain_ref("RegistrationInfo", c.input_id(0)?)]))
    })?;
    {
        let f = f.clone();
        r.register("get payment process", move |c: &mut ActivityCall<'_>| {
            let graph = match user(&f, &c.input_id(0)?)?.payment_preference.as_deref() {
                Some("creditCard") => "CreditCardPayment",
                Some("invoice") => "InvoicePayment",
                _ => return Ok(Outcome::branch("manual")),
            };
            Ok(Outcome::with("default", vec![c.instantiate(graph)?]))
        })?;
    }
    for (id, ty) in [("create credit card provider", "CreditCardPayment"), ("create invoice provider", "InvoicePayment")] {
        r.register(id, move |c: &mut ActivityCall<'_>| {
            let state = BTreeMap::from([("user".to_string(), Value::str(c.input_id(0)?))]);
            Ok(Outcome::with("ok", vec![c.new_service(ty, state)]))
        })?;
    }
    r.register("send invoice", |_: &mut ActivityCall<'_>| Ok(Outcome::branch("ok")))?;
    {
        let f = f.clone();
        r.register_for("charge", "CreditCardPayment", move |c: &mut ActivityCall<'_>| {
            let uid = c.input_id(0)?;
            if user(&f, &uid)?.card_valid {
                Ok(Outcome::with("ok", vec![Value::str(format!("cc-{uid}"))]))
            } else {
                Ok(Outcome::branch("declined"))
            }
        })?;
    }
    r.register_for("charge", "InvoicePayment", |c: &mut ActivityCall<'_>| {
        Ok(Outcome::with("ok", vec![Value::str(format!("invoice-{}", c.input_id(0)?))]))
    })?;

    paper_check(r, &f, "did at least one author pay?", |f, p| any_author(f, p, |u| u.paid))?;
    paper_check(r, &f, "flight booked?", |f, p| any_author(f, p, |u| u.flight_booked))?;
    paper_check(r, &f, "hotel booked?", |f, p| any_author(f, p, |u| u.hotel_booked))?;
    paper_check(r, &f, "registered?", |f, p| any_author(f, p, |u| u.registered))?;
    paper_check(r, &f, "copyrightForm?", |_, p| p.copyright_form)?;
    paper_check(r, &f, "margins?", |_, p| p.margins_ok)?;
    paper_check(r, &f, "not a plagiarism?", |_, p| !p.plagiarism)?;
    paper_producer(r, &f, "finalVersion?", "PdfDocument", |p| p.final_version)?;
    paper_producer(r, &f, "sourceArchive?", "SourceArchive", |p| p.sources)?;
    paper_producer(r, &f, "compiles?", "PdfDocument", |p| p.compiles)?;

    r.register("prepare proceedings", |_: &mut ActivityCall<'_>| Ok(Outcome::branch("ok")))?;
    r.register("send to springer", |_: &mut ActivityCall<'_>| Ok(Outcome::branch("ok")))?;
    r.register("open paper iterator", |c: &mut ActivityCall<'_>| {
        let state = BTreeMap::from([
            ("proceedings".to_string(), Value::str(c.input_id(0)?)),
            ("cursor".to_string(), Value::int(0)),
        ]);
        Ok(Outcome::with("ok", vec![c.new_service("PaperIterator", state)]))
    })?;
    {
        let f = f.clone();
        r.register_for("iterate papers in proceedings", "PaperIterator", move |c: &mut ActivityCall<'_>| {
            let mut s = c.service_state()?;
            let pid = s.state.get("proceedings").and_then(Value::as_str).unwrap_or_default().to_string();
            let cursor = s.state.get("cursor").and_then(Value::as_int).unwrap_or(0);
            let papers = &f
                .proceedings
                .get(&pid)
                .ok_or_else(|| ActivityError::new(format!("no proceedings `{pid}` in fixtures")))?
                .papers;
            match papers.get(cursor as usize) {
                Some(p) => {
                    s.state.insert("cursor".into(), Value::int(cursor + 1));
                    Ok(Outcome::with("next", vec![Value::domain_ref("Paper", p.clone())]))
                }
                None => Ok(Outcome::branch("done")),
            }
        })?;
    }
    Ok(())
}
