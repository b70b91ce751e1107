/// Static description of a check: identifier, the estimate it tests, and the
/// default pass rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckInfo {
    pub id: &'static str,
    pub estimate: &'static str,
    pub tolerance: f64,
    pub policy: &'static str,
}

/// Every check, sorted by id.
pub const CHECKS: &[CheckInfo] = &[
    CheckInfo {
        id: "bv_uniformity",
        estimate: "sup_t ‖Γ(t,0)‖_{ℓᵖ→ℓᵖ} ≤ Π(1+C‖A_{j+1}−A_j‖_∞) ≤ e^{C‖A‖_{BV(L^∞)}}, uniform in the partition",
        tolerance: 0.0,
        policy: "variation across jump counts ≤ 10%; log-growth rate in the budget does not increase by more than 10%",
    },
    CheckInfo {
        id: "conservation",
        estimate: "Γ(t,s)1 = 1 and Γ(t,s)*1 = 1",
        tolerance: 0.0,
        policy: "max deviation ≤ 1e-10",
    },
    CheckInfo {
        id: "contraction", estimate: "‖Γ(t,s)‖_{L²→L²} ≤ 1", tolerance: 1e-10, policy: "σ_max ≤ 1 + 1e-10"
    },
    CheckInfo {
        id: "duhamel",
        estimate: "Γ(t,0)h = e^{−tL̲}h + ∫₀ᵗ e^{−(t−s)L̲}(L̲ − L(s))Γ(s,0)h ds",
        tolerance: 0.0,
        policy: "relative residual ≤ 1e-7",
    },
    CheckInfo {
        id: "energy",
        estimate: "‖u₀‖² = 2 Re ∫₀ᵀ ⟨A∇u,∇u⟩ dt + ‖u(T)‖²",
        tolerance: 0.0,
        policy: "relative residual ≤ 1e-7",
    },
    CheckInfo {
        id: "interior_representation",
        estimate: "∫ u(s,x) Γ(t,s)*h(x) dx = ∫ u(t,x) h(x) dx",
        tolerance: 0.0,
        policy: "relative residual ≤ 1e-10 over 10 random h",
    },
    CheckInfo {
        id: "kernel_gaussian",
        estimate: "|k(t,s,x,y)| ≤ C(t−s)^{−n/2} e^{−c|x−y|²/4(t−s)}",
        tolerance: 0.0,
        policy: "fitted C and c vary ≤ 30% under refinement, c > 0; real coefficients only",
    },
    CheckInfo {
        id: "local_energy",
        estimate: "‖u(b)‖²_{L²(B(x,r))} ≤ (4κ²Λ²/λr² + 1/(b−a)) ∫_a^b ‖u‖²_{L²(B(x,2r))}",
        tolerance: 0.0,
        policy: "both local bounds hold with the measured cutoff constant κ",
    },
    CheckInfo {
        id: "max_square",
        estimate: "‖u‖_{X^p} ≲ ‖∇u‖_{T^{p,2}} ≲ ‖u‖_{X^p}",
        tolerance: 0.0,
        policy: "both ratios finite and varying ≤ 30% under refinement",
    },
    CheckInfo {
        id: "maxreg",
        estimate: "∇R_L = M̃_L and ‖M_L‖_{L²(L²)→L²(L²)} < ∞",
        tolerance: 0.0,
        policy: "identity residual ≤ 1e-9 on 20 probes; norm estimate varies ≤ 25% under refinement",
    },
    CheckInfo {
        id: "norm_equivalence",
        estimate: "‖u₀‖ = ‖u‖_{L^∞(L²)} ≤ √(2Λ)‖∇u‖_{L²(L²)} ≤ √(Λ/λ)‖u₀‖",
        tolerance: 0.02,
        policy: "each inequality within 2%",
    },
    CheckInfo {
        id: "norm_identities",
        estimate: "‖F‖_{T^{2,2}} = ‖F‖_{L²(L²)} and ‖g‖_{E²_δ} = ‖g‖_{L²}",
        tolerance: 0.0,
        policy: "relative residual ≤ 1e-12 on 50 random fields",
    },
    CheckInfo {
        id: "offdiagonal",
        estimate: "‖1_E Γ(t,s) 1_F‖ ≤ e^{−α d(E,F)²/(t−s)}, α=λ/4Λ²",
        tolerance: 0.05,
        policy: "block norm ≤ 1.05 × bound",
    },
    CheckInfo {
        id: "reverse_holder",
        estimate: "(⨏_{B(r)}|u|^q)^{1/q} ≤ C(⨏_{B(4r)}|u|²)^{1/2}, q = 2+4/n",
        tolerance: 0.0,
        policy: "sup ratio varies ≤ 30% under refinement",
    },
    CheckInfo {
        id: "struct_bound",
        estimate: "‖u‖_{L^∞(L²)} ≤ √(2‖u‖_{L²(Ḣ¹)}‖∂ₜu‖_{L²(Ḣ⁻¹)})",
        tolerance: 0.05,
        policy: "inequality within 5%",
    },
    CheckInfo {
        id: "whitney_fatou",
        estimate: "⨏_{δ/2}^δ ⨏_{B(x,√δ)} |u(t,y) − f(x)|² dy dt → 0",
        tolerance: 0.0,
        policy: "error decreases along dyadic δ up to 10% (round-off floor 1e-14‖u₀‖_∞), final ≤ 1e-3‖u₀‖_∞",
    },
];

pub fn lookup(id: &str) -> Option<&'static CheckInfo> {
    let id = id.strip_prefix("check_").unwrap_or(id);
    CHECKS.iter().find(|c| c.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_sorted_and_unique() {
        assert!(CHECKS.windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn lookup_accepts_prefixed_ids() {
        assert_eq!(lookup("check_offdiagonal").unwrap().id, "offdiagonal");
        assert!(lookup("offdiagonal").unwrap().estimate.contains("α=λ/4Λ²"));
        assert!(lookup("nope").is_none());
    }
}
