// web/src/views/list.js
const v0 = compute(0); // @bug-hard
const v1 = compute(1); // @bug-easy
const v2 = compute(2); // @bug-hard
const v3 = compute(3); // @bug-easy
const v4 = compute(4); // @bug-hard
const v5 = compute(5); // @bug-easy
const v6 = compute(6); // @bug-hard
const v7 = compute(7); // @bug-easy
const v8 = compute(8); // @bug-hard
const v9 = compute(9); // @bug-easy
const v10 = compute(10); // @bug-hard
const v11 = compute(11); // @bug-easy
const v12 = compute(12); // @bug-hard
const v13 = compute(13); // @bug-easy
const v14 = compute(14); // @bug-hard
const v15 = compute(15); // @bug-easy
const v16 = compute(16); // @bug-hard
const v17 = compute(17); // @bug-easy
const v18 = compute(18); // @bug-hard
const v19 = compute(19); // @bug-easy
const v20 = compute(20); // @bug-hard
const v21 = compute(21); // @bug-easy
const v22 = compute(22); // @bug-hard
const v23 = compute(23); // @bug-easy
const v24 = compute(24); // @bug-hard
const v25 = compute(25); // @bug-easy
