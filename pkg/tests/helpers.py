from segfuse import BinaryMask, GroundTruthInstance, InstancePrediction


def rect_mask(w, h, x0, y0, x1, y1):
    return BinaryMask.from_rect(w, h, x0, y0, x1, y1)


def pred(iid, conf, mask):
    return InstancePrediction(iid, conf, mask)


def gt(gid, mask, image_id=1):
    return GroundTruthInstance(gid, mask, image_id)


def micro_case(seed, max_preds=10, max_gts=5, size=8):
    """Random small multi-image case: (preds_per_image, gts_per_image, oracle_images)."""
    import numpy as np

    import oracles

    rng = np.random.default_rng(seed)
    n_images = int(rng.integers(1, 4))
    n_preds = int(rng.integers(0, max_preds + 1))
    n_gts = int(rng.integers(0, max_gts + 1))
    pred_img = rng.integers(0, n_images, size=n_preds)
    gt_img = rng.integers(0, n_images, size=n_gts)

    def rand_rect():
        x0, y0 = rng.integers(0, size - 1, size=2)
        x1 = rng.integers(x0 + 1, size + 1)
        y1 = rng.integers(y0 + 1, size + 1)
        return int(x0), int(y0), int(x1), int(y1)

    gts = [[] for _ in range(n_images)]
    gt_rects = []
    for k in range(n_gts):
        r = rand_rect()
        gt_rects.append((int(gt_img[k]), r))
        gts[gt_img[k]].append(gt(100 + k, rect_mask(size, size, *r), int(gt_img[k])))
    preds = [[] for _ in range(n_images)]
    for k in range(n_preds):
        img = int(pred_img[k])
        same = [r for i, r in gt_rects if i == img]
        if same and rng.random() < 0.7:
            x0, y0, x1, y1 = same[int(rng.integers(len(same)))]
            dx, dy = rng.integers(-1, 2, size=2)
            x0, x1 = max(0, x0 + dx), min(size, x1 + dx)
            y0, y1 = max(0, y0 + dy), min(size, y1 + dy)
            if x1 <= x0 or y1 <= y0:
                x0, y0, x1, y1 = rand_rect()
        else:
            x0, y0, x1, y1 = rand_rect()
        conf = float(rng.integers(1, 11)) / 10
        preds[img].append(pred(k, conf, rect_mask(size, size, x0, y0, x1, y1)))
    images = [
        ([(p.instance_id, p.confidence, oracles.pixels(p.mask)) for p in ps],
         [oracles.pixels(g.mask) for g in gs])
        for ps, gs in zip(preds, gts)
    ]
    return preds, gts, images
