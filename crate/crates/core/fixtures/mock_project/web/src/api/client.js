// web/src/api/client.js
const v0 = compute(0); // @bug-easy
const v1 = compute(1); // @bug-hard
const v2 = compute(2); // @bug-easy
const v3 = compute(3); // @bug-hard
const v4 = compute(4); // @bug-easy
const v5 = compute(5); // @bug-hard
const v6 = compute(6); // @bug-easy
const v7 = compute(7); // @bug-hard
const v8 = compute(8); // @bug-easy
const v9 = compute(9); // @bug-hard
const v10 = compute(10); // @bug-easy
const v11 = compute(11); // @bug-hard
const v12 = compute(12); // @bug-easy
const v13 = compute(13); // @bug-hard
const v14 = compute(14); // @bug-easy
const v15 = compute(15); // @bug-hard
const v16 = compute(16); // @bug-easy
const v17 = compute(17); // @bug-hard
const v18 = compute(18); // @bug-easy
const v19 = compute(19); // @bug-hard
const v20 = compute(20); // @bug-easy
const v21 = compute(21); // @bug-hard
const v22 = compute(22); // @bug-easy
const v23 = compute(23); // @bug-hard
const v24 = compute(24); // @bug-easy
const v25 = compute(25); // @bug-hard
