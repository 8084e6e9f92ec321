//! Acausal component-based circuit modeling.
//!
//! Components declare equations, not input→output assignments. Each pin
//! carries a potential variable `<owner>.<pin>.v` and a flow variable
//! `<owner>.<pin>.i`; connecting pins imposes equality of potentials and a
//! Kirchhoff flow balance. Flattening gathers every component-local and
//! connection equation into one system, and
//! [`ComponentSystem::reduce_to_state_space`] eliminates the algebraic
//! unknowns by Gaussian elimination, leaving an explicit ODE
//! `ẋ = f(x, u)` in the differentiated variables.
//!
//! Promoting a source parameter to a control input is a *re-designation*:
//! the same flattened equations serve simulation (`controls = []`, all
//! parameters fixed) and optimal control (`controls = [source.V]`), which
//! is what lets a plant model built from components feed the transcription
//! pipeline unchanged.
//!
//! The library is deliberately small — `Resistor`, `Capacitor`,
//! `ConstantVoltage`, `Ground` — just enough for RC-style plants with one
//! energy-storage element. Derivatives appear in equations as marker
//! variables named `d(<var>)`.

use crate::expr::{affine_parts, Expr};
use std::collections::{HashMap, HashSet};

/// Name of the derivative marker variable for `var`.
pub fn derivative_marker(var: &str) -> String {
    format!("d({var})")
}

/// Component behavior and parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentKind {
    Resistor { resistance: f64 },
    Capacitor { capacitance: f64 },
    ConstantVoltage { volts: f64 },
    Ground,
}

impl ComponentKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            ComponentKind::Resistor { .. } => "Resistor",
            ComponentKind::Capacitor { .. } => "Capacitor",
            ComponentKind::ConstantVoltage { .. } => "ConstantVoltage",
            ComponentKind::Ground => "Ground",
        }
    }

    fn pin_names(&self) -> &'static [&'static str] {
        match self {
            ComponentKind::Ground => &["g"],
            _ => &["p", "n"],
        }
    }
}

/// A named component instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
}

/// Reference to one pin of one component.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PinRef {
    pub component: String,
    pub pin: String,
}

impl PinRef {
    pub fn new(component: impl Into<String>, pin: impl Into<String>) -> PinRef {
        PinRef {
            component: component.into(),
            pin: pin.into(),
        }
    }

    /// Parse `owner.pin`.
    pub fn parse(text: &str) -> Option<PinRef> {
        let (owner, pin) = text.split_once('.')?;
        if owner.is_empty() || pin.is_empty() || pin.contains('.') {
            return None;
        }
        Some(PinRef::new(owner, pin))
    }

    /// Potential variable name `<owner>.<pin>.v`.
    pub fn potential(&self) -> String {
        format!("{}.{}.v", self.component, self.pin)
    }

    /// Flow variable name `<owner>.<pin>.i`.
    pub fn flow(&self) -> String {
        format!("{}.{}.i", self.component, self.pin)
    }
}

impl std::fmt::Display for PinRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.component, self.pin)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("duplicate component name '{0}'")]
    DuplicateComponent(String),
    #[error("unknown pin '{0}'")]
    UnknownPin(String),
    #[error("duplicate pin '{0}' in one connect")]
    DuplicatePin(String),
    #[error("connect needs at least 2 pins")]
    TooFewPins,
    #[error("system is not connected")]
    NotConnected,
    #[error("unknown control variable '{0}'")]
    UnknownControl(String),
    #[error("algebraic part is not linear in the unknowns: {0}")]
    NonlinearAlgebraicPart(String),
    #[error("structurally singular system: {0}")]
    StructurallySingular(String),
}

impl Component {
    pub fn new(name: impl Into<String>, kind: ComponentKind) -> Component {
        Component {
            name: name.into(),
            kind,
        }
    }

    pub fn pins(&self) -> Vec<PinRef> {
        self.kind
            .pin_names()
            .iter()
            .map(|p| PinRef::new(self.name.clone(), *p))
            .collect()
    }

    /// Internal (non-pin) variables this component introduces: the through
    /// current `<name>.i` for resistors and sources, the branch voltage
    /// `<name>.v` for capacitors.
    pub fn internal_vars(&self) -> Vec<String> {
        match self.kind {
            ComponentKind::Resistor { .. } | ComponentKind::ConstantVoltage { .. } => {
                vec![format!("{}.i", self.name)]
            }
            ComponentKind::Capacitor { .. } => vec![format!("{}.v", self.name)],
            ComponentKind::Ground => vec![],
        }
    }

    /// Name of the designatable source parameter, if any (`<name>.V`).
    pub fn parameter_var(&self) -> Option<(String, f64)> {
        match self.kind {
            ComponentKind::ConstantVoltage { volts } => {
                Some((format!("{}.V", self.name), volts))
            }
            _ => None,
        }
    }

    /// Component-local equations, each meaning `expr = 0`.
    pub fn equations(&self) -> Vec<Expr> {
        let var = Expr::variable;
        let name = &self.name;
        match self.kind {
            // v_p − v_n − R·i = 0, i_p = i, i_n = −i
            ComponentKind::Resistor { resistance } => {
                let i = var(format!("{name}.i"));
                vec![
                    Expr::sub(
                        Expr::sub(var(format!("{name}.p.v")), var(format!("{name}.n.v"))),
                        Expr::mul(Expr::constant(resistance), i.clone()),
                    ),
                    Expr::sub(var(format!("{name}.p.i")), i.clone()),
                    Expr::add(var(format!("{name}.n.i")), i),
                ]
            }
            // v = v_p − v_n, C·d(v) = i_p, i_p + i_n = 0
            ComponentKind::Capacitor { capacitance } => {
                let v = format!("{name}.v");
                vec![
                    Expr::sub(
                        var(v.clone()),
                        Expr::sub(var(format!("{name}.p.v")), var(format!("{name}.n.v"))),
                    ),
                    Expr::sub(
                        Expr::mul(
                            Expr::constant(capacitance),
                            var(derivative_marker(&v)),
                        ),
                        var(format!("{name}.p.i")),
                    ),
                    Expr::add(var(format!("{name}.p.i")), var(format!("{name}.n.i"))),
                ]
            }
            // v_p − v_n = V (V stays symbolic until reduction), i_p = i, i_n = −i
            ComponentKind::ConstantVoltage { .. } => {
                let i = var(format!("{name}.i"));
                vec![
                    Expr::sub(
                        Expr::sub(var(format!("{name}.p.v")), var(format!("{name}.n.v"))),
                        var(format!("{name}.V")),
                    ),
                    Expr::sub(var(format!("{name}.p.i")), i.clone()),
                    Expr::add(var(format!("{name}.n.i")), i),
                ]
            }
            // v_g = 0
            ComponentKind::Ground => vec![var(format!("{name}.g.v"))],
        }
    }
}

/// Equations imposed by one connection set: potential equality against the
/// first pin and a single Kirchhoff flow balance `Σ iⱼ = 0`.
pub fn connection_equations(pins: &[PinRef]) -> Result<Vec<Expr>, CircuitError> {
    if pins.len() < 2 {
        return Err(CircuitError::TooFewPins);
    }
    let mut seen = HashSet::new();
    for p in pins {
        if !seen.insert(p.clone()) {
            return Err(CircuitError::DuplicatePin(p.to_string()));
        }
    }
    let mut eqs = Vec::with_capacity(pins.len());
    for other in &pins[1..] {
        eqs.push(Expr::sub(
            Expr::variable(pins[0].potential()),
            Expr::variable(other.potential()),
        ));
    }
    eqs.push(Expr::sum(
        pins.iter().map(|p| Expr::variable(p.flow())),
    ));
    Ok(eqs)
}

/// A component network with merged connection sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSystem {
    components: Vec<Component>,
    /// Merged connection sets: every pin appears in at most one.
    connections: Vec<Vec<PinRef>>,
}

/// Output of [`ComponentSystem::flatten`].
#[derive(Debug, Clone, PartialEq)]
pub struct Flattened {
    /// All component and connection equations, each meaning `expr = 0`.
    pub equations: Vec<Expr>,
    /// Pin potentials/flows plus component internal variables.
    pub unknowns: Vec<String>,
    /// Variables appearing under a `d(·)` marker, in order of appearance.
    pub derivative_vars: Vec<String>,
}

/// Explicit state-space form produced by reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub states: Vec<String>,
    pub dynamics: Vec<Expr>,
}

impl ComponentSystem {
    /// Assemble a system. Connect statements sharing a pin are merged into
    /// a single electrical node, so `connect(c.n, s.n)` plus
    /// `connect(c.n, g.g)` is the same node as `connect(c.n, s.n, g.g)`.
    pub fn new(
        components: Vec<Component>,
        connects: Vec<Vec<PinRef>>,
    ) -> Result<ComponentSystem, CircuitError> {
        let mut by_name: HashMap<&str, &Component> = HashMap::new();
        for c in &components {
            if by_name.insert(c.name.as_str(), c).is_some() {
                return Err(CircuitError::DuplicateComponent(c.name.clone()));
            }
        }
        for group in &connects {
            if group.len() < 2 {
                return Err(CircuitError::TooFewPins);
            }
            let mut seen = HashSet::new();
            for p in group {
                let comp = by_name
                    .get(p.component.as_str())
                    .ok_or_else(|| CircuitError::UnknownPin(p.to_string()))?;
                if !comp.kind.pin_names().contains(&p.pin.as_str()) {
                    return Err(CircuitError::UnknownPin(p.to_string()));
                }
                if !seen.insert(p.clone()) {
                    return Err(CircuitError::DuplicatePin(p.to_string()));
                }
            }
        }

        // Merge overlapping connect statements, preserving first-appearance order.
        let mut sets: Vec<Vec<PinRef>> = Vec::new();
        for group in connects {
            let hits: Vec<usize> = sets
                .iter()
                .enumerate()
                .filter(|(_, s)| s.iter().any(|p| group.contains(p)))
                .map(|(i, _)| i)
                .collect();
            match hits.first() {
                None => sets.push(group),
                Some(&first) => {
                    for &i in hits.iter().skip(1).rev() {
                        let absorbed = sets.remove(i);
                        for p in absorbed {
                            if !sets[first].contains(&p) {
                                sets[first].push(p);
                            }
                        }
                    }
                    for p in group {
                        if !sets[first].contains(&p) {
                            sets[first].push(p);
                        }
                    }
                }
            }
        }

        let system = ComponentSystem {
            components,
            connections: sets,
        };
        if !system.is_connected() {
            return Err(CircuitError::NotConnected);
        }
        Ok(system)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn connections(&self) -> &[Vec<PinRef>] {
        &self.connections
    }

    fn is_connected(&self) -> bool {
        if self.components.len() <= 1 {
            return true;
        }
        let mut adjacent: HashMap<&str, Vec<&str>> = HashMap::new();
        for set in &self.connections {
            for a in set {
                for b in set {
                    adjacent
                        .entry(a.component.as_str())
                        .or_default()
                        .push(b.component.as_str());
                }
            }
        }
        let mut seen = HashSet::new();
        let mut stack = vec![self.components[0].name.as_str()];
        while let Some(c) = stack.pop() {
            if seen.insert(c) {
                if let Some(next) = adjacent.get(c) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        self.components.iter().all(|c| seen.contains(c.name.as_str()))
    }

    /// Gather every equation and every unknown of the system.
    pub fn flatten(&self) -> Flattened {
        let mut equations = Vec::new();
        let mut unknowns = Vec::new();
        for c in &self.components {
            equations.extend(c.equations());
            for p in c.pins() {
                unknowns.push(p.potential());
                unknowns.push(p.flow());
            }
            unknowns.extend(c.internal_vars());
        }
        for set in &self.connections {
            equations.extend(
                connection_equations(set).expect("connection sets validated at build"),
            );
        }

        let mut derivative_vars = Vec::new();
        for eq in &equations {
            for v in eq.free_vars() {
                if let Some(inner) = v.strip_prefix("d(").and_then(|s| s.strip_suffix(')')) {
                    if !derivative_vars.iter().any(|d| d == inner) {
                        derivative_vars.push(inner.to_string());
                    }
                }
            }
        }
        Flattened {
            equations,
            unknowns,
            derivative_vars,
        }
    }

    /// Reduce to `ẋ = f(x, u)`: substitute non-control source parameters by
    /// value, eliminate the algebraic unknowns, and solve each differential
    /// equation for its derivative. `controls` names the parameter
    /// variables (e.g. `source.V`) promoted to inputs.
    pub fn reduce_to_state_space(
        &self,
        controls: &[String],
    ) -> Result<StateSpace, CircuitError> {
        let flat = self.flatten();
        if flat.derivative_vars.is_empty() {
            return Err(CircuitError::StructurallySingular(
                "no differentiated variables".into(),
            ));
        }

        let parameter_vars: HashMap<String, f64> = self
            .components
            .iter()
            .filter_map(|c| c.parameter_var())
            .collect();
        for c in controls {
            if !parameter_vars.contains_key(c) {
                return Err(CircuitError::UnknownControl(c.clone()));
            }
        }
        let fixed: Vec<(&str, f64)> = parameter_vars
            .iter()
            .filter(|(name, _)| !controls.contains(name))
            .map(|(name, v)| (name.as_str(), *v))
            .collect();
        let equations: Vec<Expr> = flat
            .equations
            .iter()
            .map(|e| e.substitute_values(fixed.iter().copied()))
            .collect();

        reduce_equations(&equations, &flat.unknowns, &flat.derivative_vars)
    }
}

/// Core elimination: split differential from algebraic equations, solve the
/// algebraic subsystem for the non-state unknowns by Gaussian elimination
/// with partial pivoting (real pivots, symbolic right-hand sides), then
/// solve each differential equation for its derivative marker.
pub(crate) fn reduce_equations(
    equations: &[Expr],
    unknowns: &[String],
    derivative_vars: &[String],
) -> Result<StateSpace, CircuitError> {
    let states: Vec<String> = derivative_vars.to_vec();
    let markers: Vec<String> = states.iter().map(|s| derivative_marker(s)).collect();

    let (differential, algebraic): (Vec<&Expr>, Vec<&Expr>) = equations
        .iter()
        .partition(|e| markers.iter().any(|m| e.contains_var(m)));
    if differential.len() != states.len() {
        return Err(CircuitError::StructurallySingular(format!(
            "{} differential equations for {} states",
            differential.len(),
            states.len()
        )));
    }

    let alg_unknowns: Vec<String> = unknowns
        .iter()
        .filter(|u| !states.contains(u))
        .cloned()
        .collect();
    if algebraic.len() != alg_unknowns.len() {
        return Err(CircuitError::StructurallySingular(format!(
            "{} algebraic equations for {} algebraic unknowns",
            algebraic.len(),
            alg_unknowns.len()
        )));
    }

    let n = alg_unknowns.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut rhs: Vec<Expr> = Vec::with_capacity(n);
    for eq in &algebraic {
        let (coeffs, remainder) = affine_parts(eq, &alg_unknowns)
            .ok_or_else(|| CircuitError::NonlinearAlgebraicPart(eq.to_string()))?;
        rows.push(coeffs);
        rhs.push(remainder); // equation reads Σ c·y + remainder = 0
    }

    // Gauss–Jordan with partial pivoting; the right-hand sides stay symbolic.
    let mut pivot_of_col = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for col in 0..n {
        let pivot_row = (0..n)
            .filter(|r| !used[*r])
            .max_by(|a, b| rows[*a][col].abs().total_cmp(&rows[*b][col].abs()));
        let Some(pivot_row) = pivot_row else { break };
        let pivot = rows[pivot_row][col];
        if pivot.abs() <= 1e-12 {
            return Err(CircuitError::StructurallySingular(format!(
                "zero pivot for unknown '{}'",
                alg_unknowns[col]
            )));
        }
        used[pivot_row] = true;
        pivot_of_col[col] = pivot_row;
        for r in 0..n {
            if r == pivot_row || rows[r][col] == 0.0 {
                continue;
            }
            let factor = rows[r][col] / pivot;
            for j in 0..n {
                rows[r][j] -= factor * rows[pivot_row][j];
            }
            rows[r][col] = 0.0;
            let update = Expr::sub(
                rhs[r].clone(),
                Expr::mul(Expr::constant(factor), rhs[pivot_row].clone()),
            );
            rhs[r] = update;
        }
    }

    // Back out each algebraic unknown: pivot·y + remainder = 0.
    let mut solution: HashMap<String, Expr> = HashMap::new();
    for col in 0..n {
        let r = pivot_of_col[col];
        if r == usize::MAX {
            return Err(CircuitError::StructurallySingular(format!(
                "no pivot for unknown '{}'",
                alg_unknowns[col]
            )));
        }
        let y = Expr::div(
            Expr::neg(rhs[r].clone()),
            Expr::constant(rows[r][col]),
        );
        solution.insert(alg_unknowns[col].clone(), y);
    }

    // Solve each differential equation for its marker.
    let mut dynamics: Vec<Option<Expr>> = vec![None; states.len()];
    for eq in &differential {
        let eq = eq.substitute(&solution);
        let (coeffs, remainder) = affine_parts(&eq, &markers)
            .ok_or_else(|| CircuitError::NonlinearAlgebraicPart(eq.to_string()))?;
        let nonzero: Vec<usize> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, _)| i)
            .collect();
        let [only] = nonzero.as_slice() else {
            return Err(CircuitError::StructurallySingular(
                "differential equation couples several derivatives".into(),
            ));
        };
        if dynamics[*only].is_some() {
            return Err(CircuitError::StructurallySingular(format!(
                "derivative of '{}' defined twice",
                states[*only]
            )));
        }
        dynamics[*only] = Some(Expr::div(
            Expr::neg(remainder),
            Expr::constant(coeffs[*only]),
        ));
    }
    let dynamics: Vec<Expr> = dynamics
        .into_iter()
        .map(|d| d.expect("each state has exactly one differential equation"))
        .collect();

    Ok(StateSpace { states, dynamics })
}
