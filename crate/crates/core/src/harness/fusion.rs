use crate::data::FeatureBlock;
use crate::error::{Error, Result};

/// Concatenates blocks of one trial, keeping block order and names.
pub fn fuse(blocks: &[FeatureBlock]) -> Result<FeatureBlock> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to fuse".into()))?;
    let mut out = FeatureBlock::new(
        first.trial_id.clone(),
        blocks.iter().map(|b| b.modality.as_str()).collect::<Vec<_>>().join("+"),
        blocks.iter().map(|b| b.method.as_str()).collect::<Vec<_>>().join("+"),
        Vec::new(),
        Vec::new(),
    );
    for b in blocks {
        if b.trial_id != first.trial_id {
            return Err(Error::TrialMismatch(first.trial_id.clone(), b.trial_id.clone()));
        }
        out.names.extend(b.names.iter().cloned());
        out.values.extend(b.values.iter().copied());
    }
    Ok(out)
}

/// Undoes [`fuse`] given the original blocks' lengths, modalities and
/// methods.
pub fn split_fused(fused: &FeatureBlock, parts: &[(usize, &str, &str)]) -> Result<Vec<FeatureBlock>> {
    let total: usize = parts.iter().map(|p| p.0).sum();
    if total != fused.len() {
        return Err(Error::DimMismatch {
            expected: fused.len(),
            got: total,
        });
    }
    let mut at = 0;
    Ok(parts
        .iter()
        .map(|&(n, modality, method)| {
            let b = FeatureBlock::new(
                fused.trial_id.clone(),
                modality,
                method,
                fused.names[at..at + n].to_vec(),
                fused.values[at..at + n].to_vec(),
            );
            at += n;
            b
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuse_and_split() {
        let a = FeatureBlock::indexed("t", "EEG", "eeg_psd", "a", vec![1.0, 2.0, 3.0]);
        let b = FeatureBlock::indexed("t", "GSR", "gsr_stats", "b", vec![4.0]);
        let f = fuse(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f.method, "eeg_psd+gsr_stats");
        assert_eq!(fuse(&[a.clone(), a.clone()]).unwrap().len(), 6);
        let back = split_fused(&f, &[(3, "EEG", "eeg_psd"), (1, "GSR", "gsr_stats")]).unwrap();
        assert_eq!(back, vec![a.clone(), b]);
        let other = FeatureBlock::indexed("u", "GSR", "gsr_stats", "b", vec![4.0]);
        assert!(matches!(fuse(&[a, other]), Err(Error::TrialMismatch(..))));
    }
}
