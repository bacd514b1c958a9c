public class Store {
    int v0 = compute(0); // @bug-hard
    int v1 = compute(1); // @bug-easy
    int v2 = compute(2); // @bug-hard
    int v3 = compute(3); // @bug-easy
    int v4 = compute(4); // @bug-hard
    int v5 = compute(5); // @bug-easy
    int v6 = compute(6); // @bug-hard
    int v7 = compute(7); // @bug-easy
    int v8 = compute(8); // @bug-hard
    int v9 = compute(9); // @bug-easy
    int v10 = compute(10); // @bug-hard
    int v11 = compute(11); // @bug-easy
    int v12 = compute(12); // @bug-hard
    int v13 = compute(13); // @bug-easy
    int v14 = compute(14); // @bug-hard
    int v15 = compute(15); // @bug-easy
    int v16 = compute(16); // @bug-hard
    int v17 = compute(17); // @bug-easy
    int v18 = compute(18); // @bug-hard
    int v19 = compute(19); // @bug-easy
    int v20 = compute(20); // @bug-hard
    int v21 = compute(21); // @bug-easy
    int v22 = compute(22); // @bug-hard
    int v23 = compute(23); // @bug-easy
    int v24 = compute(24); // @bug-hard
    int v25 = compute(25); // @bug-easy
}
