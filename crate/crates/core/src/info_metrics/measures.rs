use super::distribution::{Distribution, JointDistribution, TripleJoint};
use super::loss::LossFunction;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// `H_L(Y|X) = Σ_x P_X(x) · H_L(P_{Y|X=x})`.
pub fn l_conditional_entropy(joint: &JointDistribution, loss: LossFunction) -> Result<f64> {
    loss.validate(joint.labels())?;
    let mut acc = CompensatedSum::new();
    for x in 0..joint.features().len() {
        if let (px, Some(cond)) = joint.conditional(x) {
            let (_, h) = loss.bayes_action_for(joint.labels(), &cond)?;
            acc.add(px * h);
        }
    }
    Ok(acc.value())
}

/// Expected loss under `infer` of the Bayes actions fitted to `train`.
pub fn l_conditional_cross_entropy(
    infer: &JointDistribution,
    train: &JointDistribution,
    loss: LossFunction,
) -> Result<f64> {
    if infer.labels() != train.labels() || infer.features() != train.features() {
        return Err(Error::AlphabetMismatch(
            "inference and training joints use different alphabets".into(),
        ));
    }
    loss.validate(infer.labels())?;
    let mut acc = CompensatedSum::new();
    for x in 0..infer.features().len() {
        let (px, cond) = infer.conditional(x);
        let Some(cond) = cond else { continue };
        let Some(train_cond) = train.conditional(x).1 else {
            return Err(Error::Support(format!(
                "feature {} has no training mass",
                infer.features().symbol(x)
            )));
        };
        let (action, _) = loss.bayes_action_for(train.labels(), &train_cond)?;
        acc.add(px * loss.expected_loss(infer.labels(), &cond, &action)?);
    }
    Ok(acc.value())
}

/// `D_L(p‖q) = E_q[L(Y, a_p)] − E_q[L(Y, a_q)]`.
pub fn l_divergence(p: &Distribution, q: &Distribution, loss: LossFunction) -> Result<f64> {
    if p.alphabet() != q.alphabet() {
        return Err(Error::AlphabetMismatch("divergence arguments differ".into()));
    }
    let (ap, _) = loss.bayes_action_for(p.alphabet(), p.mass())?;
    let (_, hq) = loss.bayes_action_for(q.alphabet(), q.mass())?;
    Ok(loss.expected_loss(q.alphabet(), q.mass(), &ap)? - hq)
}

/// `I_L(Y;X) = H_L(Y) − H_L(Y|X)`.
pub fn l_mutual_information(joint: &JointDistribution, loss: LossFunction) -> Result<f64> {
    let (_, hy) = loss.bayes_action_for(joint.labels(), joint.label_marginal().mass())?;
    Ok(hy - l_conditional_entropy(joint, loss)?)
}

/// `I_L(Y;X|Z) = H_L(Y|Z) − H_L(Y|X,Z)` for a triple ordered `(Y, X, Z)`.
pub fn l_conditional_mutual_information(triple: &TripleJoint, loss: LossFunction) -> Result<f64> {
    Ok(l_conditional_entropy(&triple.yz(), loss)? - l_conditional_entropy(&triple.y_given_xz(), loss)?)
}

/// Neyman's χ²-divergence `Σ (p−q)²/q`, with `0²/0 = 0`.
pub fn chi2_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.alphabet() != q.alphabet() {
        return Err(Error::AlphabetMismatch("divergence arguments differ".into()));
    }
    chi2_raw(p.mass(), q.mass())
}

fn chi2_raw(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if qi > 0.0 {
            acc.add((pi - qi) * (pi - qi) / qi);
        } else if pi > 0.0 {
            return Err(Error::AbsoluteContinuity { index, p: pi });
        }
    }
    Ok(acc.value())
}

/// `I_χ²(Y;Z|X) = Σ_{x,z} P(x,z) · D_χ²(P_{Y|x,z} ‖ P_{Y|x})` for a triple ordered `(Y, X, Z)`.
pub fn chi2_conditional_mutual_information(triple: &TripleJoint) -> f64 {
    let (ya, xa, za) = triple.alphabets();
    let (ny, nx, nz) = (ya.len(), xa.len(), za.len());
    let yx = triple.yx();
    let mut acc = CompensatedSum::new();
    for x in 0..nx {
        let Some(y_given_x) = yx.conditional(x).1 else { continue };
        for z in 0..nz {
            let column: Vec<f64> = (0..ny).map(|y| triple.prob(y, x, z)).collect();
            let pxz: f64 = column.iter().sum();
            if pxz <= 0.0 {
                continue;
            }
            let y_given_xz: Vec<f64> = column.iter().map(|m| m / pxz).collect();
            // P(y|x,z) > 0 implies P(y|x) > 0, so this cannot fail
            let d = chi2_raw(&y_given_xz, &y_given_x).expect("conditional is dominated");
            acc.add(pxz * d);
        }
    }
    acc.value()
}

/// Smallest ε for which `Z →ε X →ε Y` holds: `sqrt(I_χ²(Y;Z|X))`.
pub fn epsilon_markov_coefficient(triple: &TripleJoint) -> f64 {
    chi2_conditional_mutual_information(triple).max(0.0).sqrt()
}
